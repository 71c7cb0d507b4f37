#include <Eigen/LU>

#include <random>

#include "doctest.h"
#include "kiw/tensor.hpp"

using namespace kiw;

namespace {

Mat well_conditioned(std::mt19937_64& gen, int n) {
  std::uniform_real_distribution<double> u(-0.4, 0.4);
  Mat J = Mat::Identity(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) J(i, j) += u(gen);
  return J;
}

TensorValue random_tensor(std::mt19937_64& gen, Valence v, int n) {
  std::uniform_real_distribution<double> u(-1, 1);
  TensorValue t(v, n);
  for (Eigen::Index f = 0; f < t.size(); ++f) t[f] = u(gen);
  return t;
}

}  // namespace

TEST_CASE("transform_tensor with the identity leaves components unchanged") {
  std::mt19937_64 gen(1);
  const TensorValue v = random_tensor(gen, {2, 1}, 3);
  const Mat I = Mat::Identity(3, 3);
  CHECK((transform_tensor(v, I, I).components() - v.components()).norm() == 0.0);
}

TEST_CASE("scalars are unchanged by any transform") {
  TensorValue s({0, 0}, 2);
  s[0] = 4.25;
  Mat J(2, 2);
  J << 2, 1, 0, 3;
  CHECK(transform_tensor(s, J, Mat(J.inverse()))[0] == 4.25);
}

TEST_CASE("(1,1) tensor under diag(2,3)") {
  TensorValue K({1, 1}, 2);
  K.at({0, 1}) = 1.0;
  Mat J = Vec{{2.0, 3.0}}.asDiagonal();
  const TensorValue out = transform_tensor(K, J, Mat(J.inverse()));
  CHECK(out.at({0, 1}) == doctest::Approx(2.0 / 3.0));
  CHECK(out.at({0, 0}) == 0.0);
  CHECK(out.at({1, 0}) == 0.0);
}

TEST_CASE("transform roundtrip and multiplicativity") {
  std::mt19937_64 gen(7);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 1 + trial % 3;
    const Valence v{trial % 3, (trial / 3) % 3};
    const TensorValue t = random_tensor(gen, v, n);
    const Mat J1 = well_conditioned(gen, n), J2 = well_conditioned(gen, n);
    const Mat I1 = J1.inverse(), I2 = J2.inverse();
    const TensorValue back = transform_tensor(transform_tensor(t, J1, I1), I1, J1);
    CHECK((back.components() - t.components()).norm() <= 1e-10 * (1 + t.components().norm()));
    const TensorValue two = transform_tensor(transform_tensor(t, J1, I1), J2, I2);
    const TensorValue once = transform_tensor(t, Mat(J2 * J1), Mat(I1 * I2));
    CHECK((two.components() - once.components()).norm() <=
          1e-10 * (1 + once.components().norm()));
  }
}

TEST_CASE("transform rejects mismatched matrices") {
  TensorValue v({1, 0}, 2);
  CHECK_THROWS_AS(transform_tensor(v, Mat::Identity(3, 3), Mat::Identity(3, 3)), ShapeMismatch);
}

TEST_CASE("pullback and pushforward on R^1 with phi(x) = 2x") {
  Mat J(1, 1), Y(1, 1);
  J << 2.0;
  Y << 0.5;
  TensorValue form({0, 1}, 1), vec({1, 0}, 1);
  form[0] = 1.0;
  vec[0] = 1.0;
  CHECK(pullback(form, J, Y)[0] == doctest::Approx(2.0));
  CHECK(pullback(vec, J, Y)[0] == doctest::Approx(0.5));
  CHECK(pushforward(vec, J, Y)[0] == doctest::Approx(2.0));
  TensorValue s({0, 0}, 1);
  s[0] = -3.0;
  CHECK(pullback(s, J, Y)[0] == -3.0);
}

TEST_CASE("pushforward undoes pullback") {
  std::mt19937_64 gen(3);
  const Mat J = well_conditioned(gen, 2);
  const Mat Y = J.inverse();
  const TensorValue t = random_tensor(gen, {1, 2}, 2);
  const TensorValue r = pushforward(pullback(t, J, Y), J, Y);
  CHECK((r.components() - t.components()).norm() <= 1e-10);
}

TEST_CASE("pairing") {
  TensorValue dx({0, 1}, 1), dxv({1, 0}, 1);
  dx[0] = 1.0;
  dxv[0] = 1.0;
  CHECK(pair(dx, dxv) == 1.0);
  TensorValue K({1, 1}, 2), S({1, 1}, 2);
  K.at({0, 1}) = 3.0;
  S.at({1, 0}) = 5.0;
  CHECK(pair(K, S) == 15.0);
  CHECK(pair(TensorValue({1, 1}, 2), S) == 0.0);
  CHECK_THROWS_AS(pair(K, TensorValue({2, 0}, 2)), ValenceMismatch);
  // (2,1) against (1,2): K^{ab}_c S^c_{ab}
  TensorValue A({2, 1}, 2), B({1, 2}, 2);
  A.at({0, 1, 1}) = 2.0;
  B.at({1, 0, 1}) = 7.0;
  B.at({0, 1, 1}) = 100.0;
  CHECK(pair(A, B) == 14.0);
}
