#include <cmath>

#include "kiw/verifier.hpp"

namespace kiw {

namespace {

// Contracts one slot of T with m: contravariant slots as m(i,p) T^p,
// covariant slots as T_q m(q,j).
TensorValue slot(const TensorValue& T, int s, const Mat& m) {
  const int n = T.dim();
  const Valence v = T.valence();
  const Eigen::Index stride = ipow(n, v.rank() - 1 - s);
  const bool contra = s < v.contra;
  TensorValue out(v, n);
  for (Eigen::Index f = 0; f < T.size(); ++f) {
    const int d = static_cast<int>((f / stride) % n);
    const Eigen::Index base = f - d * stride;
    double acc = 0.0;
    for (int p = 0; p < n; ++p) acc += (contra ? m(d, p) : m(p, d)) * T[base + p * stride];
    out[f] = acc;
  }
  return out;
}

// Algebraic part of L_X for A = DX: covariant slots gain T A, contravariant
// slots lose A T.
TensorValue derivation(const TensorValue& T, const Mat& A) {
  TensorValue out(T.valence(), T.dim());
  for (int s = 0; s < T.valence().rank(); ++s) {
    if (s < T.valence().contra)
      out -= slot(T, s, A);
    else
      out += slot(T, s, A);
  }
  return out;
}

// Pull-back written slot by slot with Y = D psi and J = D phi.
TensorValue pulled(const TensorValue& T, const Mat& J, const Mat& Y) {
  TensorValue out = T;
  for (int s = 0; s < T.valence().rank(); ++s) out = slot(out, s, s < T.valence().contra ? Y : J);
  return out;
}

MultiIndex unit(int k) {
  MultiIndex e{0, 0, 0};
  e[k] = 1;
  return e;
}

MultiIndex pair_index(int k, int l) {
  MultiIndex e{0, 0, 0};
  e[k] += 1;
  e[l] += 1;
  return e;
}

struct Coeffs {
  Vec v;
  Mat D;                 // D(i,j) = d_j X^i
  std::vector<Mat> dD;   // dD[l](i,j) = d_l d_j X^i
};

Coeffs coeffs_of(const TensorJet& X, bool second) {
  const int n = X.dim();
  Coeffs c{Vec(n), Mat(n, n), {}};
  for (int i = 0; i < n; ++i) {
    c.v[i] = X[i].value();
    for (int j = 0; j < n; ++j) c.D(i, j) = X[i].partial(unit(j));
  }
  if (second) {
    c.dD.assign(n, Mat(n, n));
    for (int l = 0; l < n; ++l)
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) c.dD[l](i, j) = X[i].partial(pair_index(l, j));
  }
  return c;
}

// X . grad T from a jet of T.
TensorValue directional(const TensorJet& T, const Vec& X) {
  TensorValue out(T.valence(), T.dim());
  for (int k = 0; k < X.size(); ++k) out += partial_of(T, unit(k)) * X[k];
  return out;
}

}  // namespace

const std::array<const char*, kHatCount>& hatted_names() {
  static const std::array<const char*, kHatCount> names{"G1_hat", "G2_hat", "G3_hat", "H1_hat",
                                                        "H2_hat"};
  return names;
}

ExpandedCheck expanded_integrand_check(const ExpandedState& s) {
  const int n = static_cast<int>(s.y.size());
  const TensorValue S = s.S->eval(s.t, s.x, s.chart);
  const TensorJet Kj = s.K->jet(s.t, s.y, s.chart, 2);
  const TensorJet Gj = s.G->jet(s.t, s.y, s.chart, 1);
  const TensorJet bj = s.b->jet(s.t, s.y, s.chart, 1);
  const TensorJet xj = s.xi->jet(s.t, s.y, s.chart, 2);
  const Coeffs b = coeffs_of(bj, false);
  const Coeffs xi = coeffs_of(xj, true);
  const Mat& A = xi.D;

  ExpandedCheck out;
  auto P = [&](const TensorValue& T) { return pulled(T, s.jac, s.inv_jac); };

  // Coordinate expansions.
  const TensorValue K = values_of(Kj);
  const TensorValue G = values_of(Gj);
  const TensorValue xiK = directional(Kj, xi.v);
  TensorValue xixiK = directional(Kj, A * xi.v);
  for (int l = 0; l < n; ++l)
    for (int k = 0; k < n; ++k) xixiK += partial_of(Kj, pair_index(l, k)) * (xi.v[l] * xi.v[k]);
  Mat xiA = Mat::Zero(n, n);
  for (int l = 0; l < n; ++l) xiA += xi.v[l] * xi.dD[l];
  const TensorValue lie2 =
      xixiK + derivation(xiK, A) * 2.0 + derivation(K, xiA) + derivation(derivation(K, A), A);
  const TensorValue lieb = directional(Kj, b.v) + derivation(K, b.D);
  out.coordinate[HatG1] = pair(P(lieb) + P(lie2) * 0.5, S);
  out.coordinate[HatG2] = pair(P(directional(Gj, xi.v) + derivation(G, A)), S);
  out.coordinate[HatG3] = pair(P(G), S);
  out.coordinate[HatH1] = out.coordinate[HatG3];
  out.coordinate[HatH2] = pair(P(xiK + derivation(K, A)), S);

  // Geometric pairings.
  auto pb = [&](const TensorValue& T) { return pullback(T, s.jac, s.inv_jac); };
  const TensorJet l1 = lie_derivative_jet(Kj, xj, 1);
  const TensorValue lie_b = values_of(lie_derivative_jet(Kj, bj, 0));
  const TensorValue lie_xx = values_of(lie_derivative_jet(l1, xj, 0));
  out.geometric[HatG1] = pair(pb(lie_b + lie_xx * 0.5), S);
  out.geometric[HatG2] = pair(pb(values_of(lie_derivative_jet(Gj, xj, 0))), S);
  out.geometric[HatG3] = pair(pb(values_of(Gj)), S);
  out.geometric[HatH1] = out.geometric[HatG3];
  out.geometric[HatH2] = pair(pb(values_of(l1)), S);

  for (int h = 0; h < kHatCount; ++h) {
    out.deviation[h] =
        std::abs(out.coordinate[h] - out.geometric[h]) / std::max(1.0, std::abs(out.geometric[h]));
    out.worst = std::max(out.worst, out.deviation[h]);
  }
  return out;
}

}  // namespace kiw
