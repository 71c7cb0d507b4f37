#include <Eigen/LU>

#include <cmath>
#include <memory>
#include <vector>

#include "doctest.h"
#include "kiw/field_library.hpp"
#include "kiw/flow.hpp"

using namespace kiw;

namespace {

std::shared_ptr<const ChartAtlas> euclid(int n) {
  return std::make_shared<const ChartAtlas>(ChartAtlas::euclidean(n));
}

DrivingPaths brownian(int dims, const TimeGrid& g, std::uint64_t seed, std::uint32_t path) {
  DriverSpec spec;
  spec.brownian_dims = dims;
  return sample_drivers(spec, g, RngStream(seed, path));
}

Vec vec(std::initializer_list<double> v) {
  Vec x(static_cast<Eigen::Index>(v.size()));
  int i = 0;
  for (double a : v) x[i++] = a;
  return x;
}

FieldPtr gbm_noise() { return linear_vector_field(Mat::Identity(1, 1), Vec::Zero(1)); }

// Nonlinear planar SDE with bounded coefficients.
FlowSDE planar_sde() {
  FlowSDE sde;
  sde.atlas = euclid(2);
  Mat A(2, 2);
  A << -0.2, 0.4, -0.3, 0.1;
  sde.b = linear_combination({linear_vector_field(A, vec({0.1, 0.0})),
                              random_trig_field({1, 0}, 2, 7, 0.3)},
                             {1.0, 1.0});
  sde.xi = {random_trig_field({1, 0}, 2, 11, 0.4), rotation_field(0.3)};
  return sde;
}

double fit_order(const std::vector<double>& err) {
  const int n = static_cast<int>(err.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (int i = 0; i < n; ++i) {
    const double x = -i * std::log(2.0), y = std::log(err[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace

TEST_CASE("zero SDE is the identity flow") {
  FlowSDE sde;
  sde.atlas = euclid(2);
  sde.b = zero_field({1, 0}, 2);
  sde.xi = {zero_field({1, 0}, 2)};
  const DrivingPaths d = brownian(1, {1.0, 64}, 1, 0);
  for (Scheme s : {Scheme::EulerIto, Scheme::HeunStratonovich}) {
    const FlowPath fp = integrate_flow(sde, d, vec({0.3, -0.7}), 0, s);
    CHECK(fp.status == FlowStatus::Completed);
    CHECK(fp.last() == 64);
    for (const FlowState& st : fp.states) {
      CHECK((st.y - vec({0.3, -0.7})).norm() == 0.0);
      CHECK((st.J - Mat::Identity(2, 2)).norm() == 0.0);
      CHECK((st.Y - Mat::Identity(2, 2)).norm() == 0.0);
    }
  }
}

TEST_CASE("geometric Brownian flow under Heun") {
  FlowSDE sde;
  sde.atlas = euclid(1);
  sde.b = zero_field({1, 0}, 1);
  sde.xi = {gbm_noise()};
  const int paths = 200, levels = 5;
  std::vector<double> ss(levels, 0.0);
  for (int p = 0; p < paths; ++p) {
    const RngStream rng(3, p);
    DriverSpec spec;
    DrivingPaths d = sample_drivers(spec, {1.0, 64}, rng);
    for (int l = 0; l < levels; ++l) {
      if (l > 0) d = refine_dyadic(d, rng);
      const FlowPath fp = integrate_flow(sde, d, vec({1.0}), 0, Scheme::HeunStratonovich);
      const double BT = d.bm[0].values[d.grid.steps];
      const double e = fp.last_state().y[0] - std::exp(BT);
      ss[l] += e * e;
      if (l == levels - 1) {
        CHECK(std::abs(fp.last_state().J(0, 0) * std::exp(-BT) - 1.0) <= 0.05);
        CHECK(std::abs(fp.last_state().Y(0, 0) * std::exp(BT) - 1.0) <= 0.05);
        CHECK(std::abs(fp.last_state().J(0, 0) * fp.last_state().Y(0, 0) - 1.0) <= 0.05);
      }
    }
  }
  std::vector<double> rms;
  for (double s : ss) rms.push_back(std::sqrt(s / paths));
  CHECK(fit_order(rms) >= 0.4);
  CHECK(rms.back() <= std::sqrt(1.0 / 1024));
}

TEST_CASE("Stratonovich-to-Ito correction terms") {
  SUBCASE("constant noise") {
    const CorrectionTerms c =
        strat_to_ito_correction({constant_field({1, 0}, 2, vec({1.0, 2.0}))}, 0.0, vec({0.5, 0.1}), 0);
    CHECK(c.c_plus.norm() == 0.0);
    CHECK(c.c_minus.norm() == 0.0);
  }
  SUBCASE("xi = x") {
    const CorrectionTerms c = strat_to_ito_correction({gbm_noise()}, 0.0, vec({0.8}), 0);
    CHECK(c.c_plus(0, 0) == doctest::Approx(0.5));
    CHECK(c.c_minus(0, 0) == doctest::Approx(0.5));
  }
  SUBCASE("xi = x^2 / 2 at 1") {
    const CorrectionTerms c = strat_to_ito_correction({power_field(0.5, 2)}, 0.0, vec({1.0}), 0);
    CHECK(c.c_plus(0, 0) == doctest::Approx(0.75));
    CHECK(c.c_minus(0, 0) == doctest::Approx(0.25));
  }
  SUBCASE("linear noise gives the squared matrix") {
    Mat A(2, 2);
    A << 0.3, -1.0, 0.5, 0.2;
    const CorrectionTerms c =
        strat_to_ito_correction({linear_vector_field(A, vec({0.1, 0.2}))}, 0.0, vec({1.0, -2.0}), 0);
    CHECK((c.c_plus - 0.5 * A * A).norm() <= 1e-14);
    CHECK((c.c_minus - 0.5 * A * A).norm() <= 1e-14);
  }
  CHECK_THROWS_AS(strat_to_ito_correction({with_smoothness(gbm_noise(), 1)}, 0.0, vec({1.0}), 0),
                  InsufficientSmoothness);
}

TEST_CASE("variational Jacobian matches common-noise finite differences") {
  const FlowSDE sde = planar_sde();
  const TimeGrid g{1.0, 256};
  const double tol = std::max(1e-4, 10.0 * std::sqrt(g.h()));
  for (Scheme s : {Scheme::EulerIto, Scheme::HeunStratonovich}) {
    for (int p = 0; p < 10; ++p) {
      const DrivingPaths d = brownian(2, g, 17, p);
      const Vec x0 = vec({0.2, -0.4});
      const FlowPath fp = integrate_flow(sde, d, x0, 0, s);
      REQUIRE(fp.status == FlowStatus::Completed);
      const double eps = 1e-6;
      Mat fd(2, 2);
      for (int j = 0; j < 2; ++j) {
        Vec e = Vec::Zero(2);
        e[j] = eps;
        const Vec yp = integrate_flow(sde, d, x0 + e, 0, s).last_state().y;
        const Vec ym = integrate_flow(sde, d, x0 - e, 0, s).last_state().y;
        fd.col(j) = (yp - ym) / (2 * eps);
      }
      const Mat& J = fp.last_state().J;
      CHECK((J - fd).cwiseAbs().maxCoeff() <= tol * std::max(1.0, J.cwiseAbs().maxCoeff()));
      const Mat inv = J.inverse();
      CHECK((fp.last_state().Y - inv).cwiseAbs().maxCoeff() <= 0.5 * inv.cwiseAbs().maxCoeff());
      CHECK(fp.jac_consistency_max < 1.0);
    }
  }
}

TEST_CASE("Heun derivatives are exact derivatives of the step map") {
  const FlowSDE sde = planar_sde();
  const DrivingPaths d = brownian(2, {1.0, 16}, 4, 2);
  const Vec x0 = vec({0.4, 0.1});
  const FlowPath fp = integrate_flow(sde, d, x0, 0, Scheme::HeunStratonovich);
  Mat fd(2, 2);
  for (int j = 0; j < 2; ++j) {
    Vec e = Vec::Zero(2);
    e[j] = 1e-6;
    fd.col(j) = (integrate_flow(sde, d, x0 + e, 0, Scheme::HeunStratonovich).last_state().y -
                 integrate_flow(sde, d, x0 - e, 0, Scheme::HeunStratonovich).last_state().y) /
                2e-6;
  }
  CHECK((fp.last_state().J - fd).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("Ito and Stratonovich schemes converge to each other") {
  const FlowSDE sde = planar_sde();
  const int paths = 40, levels = 4;
  std::vector<double> ss(levels, 0.0);
  for (int p = 0; p < paths; ++p) {
    const RngStream rng(23, p);
    DriverSpec spec;
    spec.brownian_dims = 2;
    DrivingPaths d = sample_drivers(spec, {1.0, 64}, rng);
    for (int l = 0; l < levels; ++l) {
      if (l > 0) d = refine_dyadic(d, rng);
      const Vec a = integrate_flow(sde, d, vec({0.1, 0.2}), 0, Scheme::EulerIto).last_state().y;
      const Vec b =
          integrate_flow(sde, d, vec({0.1, 0.2}), 0, Scheme::HeunStratonovich).last_state().y;
      ss[l] += (a - b).squaredNorm();
    }
  }
  std::vector<double> rms;
  for (double s : ss) rms.push_back(std::sqrt(s / paths));
  CHECK(fit_order(rms) >= 0.4);
}

TEST_CASE("flow property: split runs reproduce the full run") {
  const FlowSDE sde = planar_sde();
  const DrivingPaths d = brownian(2, {1.0, 128}, 8, 3);
  for (Scheme s : {Scheme::EulerIto, Scheme::HeunStratonovich}) {
    const FlowPath full = integrate_flow(sde, d, vec({0.3, 0.3}), 0, s);
    const FlowPath first = integrate_flow_window(sde, d, full[0], 0, 64, s);
    const FlowPath second = integrate_flow_window(sde, d, first.last_state(), 64, 128, s);
    REQUIRE(second.status == FlowStatus::Completed);
    CHECK(second.last() == 64);
    CHECK((second.last_state().y.array() == full.last_state().y.array()).all());
    CHECK((second.last_state().J.array() == full.last_state().J.array()).all());
    CHECK((second.last_state().Y.array() == full.last_state().Y.array()).all());
  }
}

TEST_CASE("chart hops") {
  SUBCASE("identity transitions leave the state unchanged") {
    const ChartAtlas atlas = ChartAtlas::euclidean_patches(2, {vec({0, 0}), vec({1, 0})}, 0.6);
    const FlowState s{0, vec({1.3, 0.1}), Mat::Identity(2, 2) * 2.0, Mat::Identity(2, 2) * 0.5};
    const FlowState o = chart_hop(s, atlas, 1);
    CHECK(o.chart == 1);
    CHECK((o.y - s.y).norm() == 0.0);
    CHECK((o.J - s.J).norm() == 0.0);
    CHECK((o.Y - s.Y).norm() == 0.0);
  }
  SUBCASE("sphere hop and hop back") {
    const ChartAtlas atlas = ChartAtlas::sphere2();
    Mat J(2, 2);
    J << 1.1, 0.2, -0.3, 0.9;
    const FlowState s{0, vec({0.9, -0.6}), J, J.inverse()};
    const FlowState o = chart_hop(chart_hop(s, atlas, 1), atlas, 0);
    CHECK((o.y - s.y).norm() <= 1e-10);
    CHECK((o.J - s.J).norm() <= 1e-10);
    CHECK((o.Y - s.Y).norm() <= 1e-10);
  }
  SUBCASE("a flow pushed over the sphere completes with hops") {
    FlowSDE sde;
    sde.atlas = std::make_shared<const ChartAtlas>(ChartAtlas::sphere2());
    sde.b = sphere_rotation_field(4.0, 0.0, 0.0);
    sde.xi = {sphere_rotation_field(0.0, 0.5, 0.5)};
    for (Scheme s : {Scheme::EulerIto, Scheme::HeunStratonovich}) {
      const DrivingPaths d = brownian(1, {1.0, 512}, 5, 0);
      const FlowPath fp = integrate_flow(sde, d, vec({0.0, 0.0}), 0, s);
      CHECK(fp.status == FlowStatus::Completed);
      CHECK(fp.hops.size() >= 1);
      CHECK(fp.hops.front().from == 0);
      CHECK(fp.hops.front().to == 1);
      // The ambient point stays on the unit sphere and agrees with the exact rotation.
      const Vec P = sde.atlas->from_coords(fp.last_state().chart, fp.last_state().y);
      CHECK(std::abs(P.norm() - 1.0) <= 1e-12);
      CHECK(fp.jac_consistency_max <= 0.1);
    }
  }
}

TEST_CASE("stopping: blow-up, chart exit and scheme hypotheses") {
  SUBCASE("b = x^2 from 1.5 blows up near t = 2/3") {
    FlowSDE sde;
    sde.atlas = euclid(1);
    sde.b = power_field(1.0, 2);
    const DrivingPaths d = brownian(1, {1.0, 4096}, 1, 0);
    const FlowPath fp = integrate_flow(sde, d, vec({1.5}), 0, Scheme::EulerIto);
    CHECK(fp.status == FlowStatus::BlownUp);
    CHECK(d.grid.t(fp.last()) <= 0.7);
    CHECK(d.grid.t(fp.last()) >= 0.6);
    CHECK_THROWS_AS(fp.jacobian(d.grid.steps), FlowStopped);
    CHECK_NOTHROW(fp.jacobian(fp.last()));
  }
  SUBCASE("without hops the flow stops at the U-ball") {
    FlowSDE sde;
    sde.atlas = std::make_shared<const ChartAtlas>(
        ChartAtlas::euclidean_patches(1, {vec({0.0}), vec({1.0})}, 0.5));
    sde.b = constant_field({1, 0}, 1, vec({2.0}));
    sde.allow_hops = false;
    const DrivingPaths d = brownian(1, {1.0, 100}, 1, 0);
    const FlowPath fp = integrate_flow(sde, d, vec({0.0}), 0, Scheme::EulerIto);
    CHECK(fp.status == FlowStatus::ExitedChart);
    CHECK(fp.last_state().y[0] < 1.5);
    sde.allow_hops = true;
    const DrivingPaths d2 = brownian(1, {0.6, 60}, 1, 0);
    const FlowPath hp = integrate_flow(sde, d2, vec({0.0}), 0, Scheme::EulerIto);
    CHECK(hp.status == FlowStatus::Completed);
    CHECK(hp.hops.size() == 1);
  }
  SUBCASE("Heun rejects noise that is not C^1 in time") {
    FlowSDE sde;
    sde.atlas = euclid(1);
    sde.b = zero_field({1, 0}, 1);
    sde.xi = {time_modulated(gbm_noise(), TimeProfile::step(0.5))};
    const DrivingPaths d = brownian(1, {1.0, 16}, 1, 0);
    CHECK_THROWS_AS(integrate_flow(sde, d, vec({1.0}), 0, Scheme::HeunStratonovich),
                    SchemeSmoothnessMismatch);
    CHECK_NOTHROW(integrate_flow(sde, d, vec({1.0}), 0, Scheme::EulerIto));
  }
}

TEST_CASE("inverse flow residual") {
  SUBCASE("deterministic linear flow") {
    FlowSDE sde;
    sde.atlas = euclid(2);
    Mat A(2, 2);
    A << -0.5, 1.0, -1.0, 0.2;
    sde.b = linear_vector_field(A, vec({0.3, 0.0}));
    const DrivingPaths d = brownian(1, {1.0, 4096}, 1, 0);
    const FlowPath fp = integrate_flow(sde, d, vec({1.0, 0.5}), 0, Scheme::HeunStratonovich);
    const Path r = inverse_flow_residual(fp, sde, d);
    CHECK(r.values.maxCoeff() <= 1e-8);
    CHECK(r.values[0] == 0.0);
  }
  SUBCASE("deterministic nonlinear flow: orders one and two") {
    FlowSDE sde;
    sde.atlas = euclid(2);
    sde.b = random_trig_field({1, 0}, 2, 3, 0.8);
    for (Scheme s : {Scheme::EulerIto, Scheme::HeunStratonovich}) {
      std::vector<double> err;
      for (int steps : {64, 128, 256, 512}) {
        const DrivingPaths d = brownian(1, {1.0, steps}, 1, 0);
        const FlowPath fp = integrate_flow(sde, d, vec({0.2, 0.1}), 0, s);
        err.push_back(inverse_flow_residual(fp, sde, d).values.maxCoeff());
      }
      const double order = fit_order(err);
      if (s == Scheme::EulerIto)
        CHECK(order == doctest::Approx(1.0).epsilon(0.15));
      else
        CHECK(order >= 1.8);
    }
  }
  SUBCASE("geometric Brownian flow: square-root rate in RMS") {
    FlowSDE sde;
    sde.atlas = euclid(1);
    sde.b = zero_field({1, 0}, 1);
    sde.xi = {linear_vector_field(Mat::Constant(1, 1, 0.5), Vec::Zero(1))};
    const int paths = 100, levels = 4;
    std::vector<double> ss(levels, 0.0);
    for (int p = 0; p < paths; ++p) {
      const RngStream rng(13, p);
      DrivingPaths d = sample_drivers(DriverSpec{}, {1.0, 64}, rng);
      for (int l = 0; l < levels; ++l) {
        if (l > 0) d = refine_dyadic(d, rng);
        const FlowPath fp = integrate_flow(sde, d, vec({1.0}), 0, Scheme::EulerIto);
        const double r = inverse_flow_residual(fp, sde, d).values.maxCoeff();
        ss[l] += r * r;
      }
    }
    std::vector<double> rms;
    for (double s : ss) rms.push_back(std::sqrt(s / paths));
    CHECK(fit_order(rms) >= 0.35);
    CHECK(rms.back() <= 1.0);
  }
}

TEST_CASE("inverse flow jets are derivatives of the backward map") {
  const FlowSDE sde = planar_sde();
  const DrivingPaths d = brownian(2, {1.0, 64}, 9, 1);
  const FlowPath fp = integrate_flow(sde, d, vec({0.1, -0.2}), 0, Scheme::HeunStratonovich);
  const int k = 40;
  const Vec y = fp[k].y;
  const InverseJets ij = inverse_flow_jets(sde, d, k, y, fp[k].chart, 3);
  REQUIRE(ij.status == FlowStatus::Completed);
  CHECK(std::abs(ij.coords[0].value() - 0.1) <= 1e-3);
  CHECK(std::abs(ij.coords[1].value() + 0.2) <= 1e-3);
  const double eps = 1e-5;
  for (int j = 0; j < 2; ++j) {
    Vec e = Vec::Zero(2);
    e[j] = eps;
    const InverseJets p = inverse_flow_jets(sde, d, k, y + e, fp[k].chart, 0);
    const InverseJets m = inverse_flow_jets(sde, d, k, y - e, fp[k].chart, 0);
    const InverseJets p1 = inverse_flow_jets(sde, d, k, y + e, fp[k].chart, 1);
    const InverseJets m1 = inverse_flow_jets(sde, d, k, y - e, fp[k].chart, 1);
    for (int i = 0; i < 2; ++i) {
      MultiIndex a{0, 0, 0};
      a[j] = 1;
      const double fd = (p.coords[i].value() - m.coords[i].value()) / (2 * eps);
      CHECK(std::abs(ij.coords[i].partial(a) - fd) <= 1e-7);
      for (int l = 0; l < 2; ++l) {
        MultiIndex b{0, 0, 0};
        b[l] = 1;
        MultiIndex ab = b;
        ab[j] += 1;
        const double fd2 = (p1.coords[i].partial(b) - m1.coords[i].partial(b)) / (2 * eps);
        CHECK(std::abs(ij.coords[i].partial(ab) - fd2) <= 1e-6);
      }
    }
  }
}
