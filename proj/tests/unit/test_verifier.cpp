#include <Eigen/LU>

#include <cmath>
#include <random>
#include <set>
#include <string>

#include "doctest.h"
#include "kiw/field_library.hpp"
#include "kiw/scenarios.hpp"
#include "kiw/verifier.hpp"

using namespace kiw;

namespace {

constexpr Valence kMixed{1, 1};

struct Run {
  DrivingPaths d;
  FlowPath fp;
  KPath K;
};

Run run_path(const Scenario& s, std::uint32_t p, int level = 0) {
  const RngStream rng(s.seed, p);
  DrivingPaths d = sample_drivers(s.drivers, s.grid, rng);
  for (int l = 0; l < level; ++l) d = refine_dyadic(d, rng);
  FlowPath fp = integrate_flow(s.sde, d, s.x0, s.chart0, s.scheme());
  KPath K(s, d);
  return {std::move(d), std::move(fp), std::move(K)};
}

bool bitwise_equal(const std::vector<TensorValue>& a, const std::vector<TensorValue>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t k = 0; k < a.size(); ++k)
    for (Eigen::Index f = 0; f < a[k].size(); ++f)
      if (a[k][f] != b[k][f]) return false;
  return true;
}

Mat random_jacobian(std::mt19937_64& gen) {
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  Mat J = Mat::Identity(2, 2);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) J(i, j) += u(gen);
  return J;
}

ExpandedState random_state(Valence v, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  ExpandedState s;
  s.t = 0.5 * (u(gen) + 1.0);
  s.x = Vec::Zero(2);
  s.y = Vec::Zero(2);
  for (int i = 0; i < 2; ++i) {
    s.x[i] = u(gen);
    s.y[i] = u(gen);
  }
  s.jac = random_jacobian(gen);
  s.inv_jac = s.jac.inverse();
  s.K = random_trig_field(v, 2, seed * 7 + 1);
  s.G = random_trig_field(v, 2, seed * 7 + 2);
  s.S = random_trig_field(v.transposed(), 2, seed * 7 + 3);
  s.b = random_trig_field({1, 0}, 2, seed * 7 + 4);
  s.xi = random_trig_field({1, 0}, 2, seed * 7 + 5);
  return s;
}

}  // namespace

TEST_CASE("theorem names round-trip") {
  for (Theorem t : all_theorems()) CHECK(theorem_from_string(to_string(t)) == t);
  CHECK_THROWS_AS(theorem_from_string("kiw_fancy"), ConfigError);
}

TEST_CASE("K path without drivers stays at K0") {
  const Scenario s = make_scenario("kunita_sphere");
  const Run r = run_path(s, 0);
  for (int k : {0, 17, 64}) {
    const TensorValue a = r.K.at(k)->eval(0.3, s.x0, 0);
    const TensorValue b = s.K0->eval(0.0, s.x0, 0);
    CHECK(max_abs(a - b) == 0.0);
  }
}

TEST_CASE("K path with A_t = t and G = K0 grows like (1 + t) K0") {
  Scenario s = make_scenario("identity");
  s.G = {s.K0};
  s.drivers.mart = {MartSpec{}};
  const Run r = run_path(s, 0);
  const TensorValue k0 = s.K0->eval(0.0, s.x0, 0);
  for (int k = 0; k <= s.grid.steps; ++k) {
    const double t = r.d.grid.t(k);
    CHECK(max_abs(r.K.at(k)->eval(t, s.x0, 0) - k0 * (1.0 + t)) <= s.grid.h());
  }
}

TEST_CASE("K path driven by M = B is a martingale at a fixed point") {
  Scenario s = make_scenario("identity");
  s.G = {s.K0};
  s.drivers.fv = {FvSpec{}};
  const int N = 4000;
  const TensorValue k0 = s.K0->eval(0.0, s.x0, 0);
  TensorValue mean(k0.valence(), 2);
  double var = 0.0;
  for (int p = 0; p < N; ++p) {
    const RngStream rng(5, p);
    const DrivingPaths d = sample_drivers(s.drivers, s.grid, rng);
    const TensorValue kT = KPath(s, d).at(s.grid.steps)->eval(1.0, s.x0, 0);
    mean += kT * (1.0 / N);
    var += d.mart[0][s.grid.steps] * d.mart[0][s.grid.steps] / N;
  }
  // K(T) = K0 (1 + B_T): each component has sd |K0| sqrt(T).
  CHECK(var == doctest::Approx(1.0).epsilon(0.1));
  for (Eigen::Index f = 0; f < k0.size(); ++f)
    CHECK(std::abs(mean[f] - k0[f]) <= 4.0 * std::abs(k0[f]) / std::sqrt(double(N)) + 1e-14);
}

TEST_CASE("non-separable G is summed at its frozen times") {
  Scenario s = make_scenario("identity");
  const FieldPtr g = random_trig_field(kMixed, 2, 77, 0.5);
  s.G = {time_modulated(g, TimeProfile::step(0.5))};
  s.drivers.mart = {MartSpec{}};
  const Run r = run_path(s, 0);
  // A_t = t and G = 1{t >= 1/2} g: K(1) = K0 + (1/2) g.
  const TensorValue want = s.K0->eval(0, s.x0, 0) + g->eval(0, s.x0, 0) * 0.5;
  CHECK(max_abs(r.K.at(s.grid.steps)->eval(1.0, s.x0, 0) - want) < 1e-12);
}

TEST_CASE("LHS under the identity flow is K(t, x)") {
  const Scenario s = make_scenario("identity");
  const Run r = run_path(s, 3);
  const auto lhs = eval_lhs(s, r.fp, r.d, r.K);
  REQUIRE(static_cast<int>(lhs.size()) == s.grid.steps + 1);
  for (int k = 0; k <= s.grid.steps; ++k)
    CHECK(max_abs(lhs[k] - r.K.at(k)->eval(r.d.grid.t(k), s.x0, 0)) == 0.0);
}

TEST_CASE("scalar LHS is plain composition") {
  const Scenario s = make_scenario("scalar_ito_wentzell");
  const Run r = run_path(s, 1);
  const auto lhs = eval_lhs(s, r.fp, r.d, r.K);
  for (int k = 0; k <= r.fp.last(); ++k) {
    const FlowState& st = r.fp[k];
    CHECK(lhs[k][0] == r.K.at(k)->eval(r.d.grid.t(k), st.y, st.chart)[0]);
  }
}

TEST_CASE("geometric Brownian 1-form: LHS and RHS approach exp(B_t) dx") {
  Scenario s = make_scenario("gbm_one_form");
  s.grid.steps = 4096;
  double lhs_ss = 0.0, rhs_ss = 0.0;
  const int N = 100;
  for (int p = 0; p < N; ++p) {
    const Run r = run_path(s, p);
    const auto lhs = eval_lhs(s, r.fp, r.d, r.K);
    const RhsPath rhs = eval_rhs(s, r.fp, r.d, r.K);
    const double exact = std::exp(r.d.bm[0][s.grid.steps]);
    lhs_ss += std::pow(lhs.back()[0] - exact, 2);
    rhs_ss += std::pow(rhs.values.back()[0] - exact, 2);
  }
  CHECK(std::sqrt(lhs_ss / N) < 0.05);
  CHECK(std::sqrt(rhs_ss / N) < 0.05);
}

TEST_CASE("identity flow residual is at rounding level") {
  const Scenario s = make_scenario("identity");
  for (std::uint32_t p = 0; p < 20; ++p) {
    const Run r = run_path(s, p);
    CHECK(sup_residual(eval_lhs(s, r.fp, r.d, r.K), eval_rhs(s, r.fp, r.d, r.K).values) <= 1e-12);
  }
}

TEST_CASE("static K: Ito pull-back RHS equals Kunita's second formula bitwise") {
  const Scenario s = make_scenario("kunita_sphere");
  for (std::uint32_t p = 0; p < 5; ++p) {
    const Run r = run_path(s, p);
    const Transport tr = transport(s, Theorem::KunitaSecond, r.fp, r.d, r.K);
    const RhsPath kunita = assemble_rhs(s, Theorem::KunitaSecond, tr, r.d);
    const RhsPath kiw = assemble_rhs(s, Theorem::KiwItoPullback, tr, r.d);
    CHECK(bitwise_equal(kunita.values, kiw.values));
    Scenario alt = s;
    alt.theorem = Theorem::KiwItoPullback;
    CHECK(bitwise_equal(eval_rhs(alt, r.fp, r.d, r.K).values, kunita.values));
  }
}

TEST_CASE("static K: Ito push-forward RHS equals Kunita's first formula bitwise") {
  Scenario s = make_scenario("kunita_first");
  s.grid.steps = 16;
  const Run r = run_path(s, 0);
  const Transport tr = transport(s, Theorem::KunitaFirst, r.fp, r.d, r.K);
  CHECK(bitwise_equal(assemble_rhs(s, Theorem::KunitaFirst, tr, r.d).values,
                      assemble_rhs(s, Theorem::KiwItoPushforward, tr, r.d).values));
}

TEST_CASE("scalar theorem agrees with the tensor pull-back term for term") {
  const Scenario s = make_scenario("scalar_ito_wentzell");
  for (std::uint32_t p = 0; p < 5; ++p) {
    const Run r = run_path(s, p);
    const RhsPath a =
        assemble_rhs(s, Theorem::ScalarItoWentzell,
                     transport(s, Theorem::ScalarItoWentzell, r.fp, r.d, r.K), r.d);
    const RhsPath b = assemble_rhs(s, Theorem::KiwItoPullback,
                                   transport(s, Theorem::KiwItoPullback, r.fp, r.d, r.K), r.d);
    REQUIRE(a.values.size() == b.values.size());
    for (std::size_t k = 0; k < a.values.size(); ++k)
      CHECK(std::abs(a.values[k][0] - b.values[k][0]) <= 1e-12);
    for (int t = 0; t < kTermCount; ++t)
      CHECK(a.term_l1[t] == doctest::Approx(b.term_l1[t]).epsilon(1e-12));
  }
}

TEST_CASE("Stratonovich minus Ito equals the half-covariation corrections") {
  for (const char* name : {"kiw_strat_pullback", "kiw_ito_pullback"}) {
    Scenario s = make_scenario(name);
    for (std::uint32_t p = 0; p < 5; ++p) {
      const Run r = run_path(s, p);
      CHECK(stratonovich_bridge_defect(s, r.fp, r.d, r.K) <= 1e-10);
    }
  }
  Scenario push = make_scenario("kiw_strat_pushforward");
  push.grid.steps = 16;
  const Run r = run_path(push, 0);
  CHECK(stratonovich_bridge_defect(push, r.fp, r.d, r.K) <= 1e-10);
}

TEST_CASE("push-forward LHS starts at K0(x0)") {
  Scenario s = make_scenario("kiw_ito_pushforward");
  s.grid.steps = 8;
  const Run r = run_path(s, 0);
  const auto lhs = eval_lhs(s, r.fp, r.d, r.K);
  CHECK(max_abs(lhs[0] - s.K0->eval(0, s.x0, 0)) < 1e-14);
  const RhsPath rhs = eval_rhs(s, r.fp, r.d, r.K);
  CHECK(sup_residual(lhs, rhs.values) < 0.2);
}

TEST_CASE("pushing the pulled-back value recovers K at the image") {
  const Scenario s = make_scenario("kiw_ito_pullback");
  const Run r = run_path(s, 2);
  const auto lhs = eval_lhs(s, r.fp, r.d, r.K);
  for (int k = 0; k <= r.fp.last(); k += 8) {
    const FlowState& st = r.fp[k];
    const TensorValue direct = r.K.at(k)->eval(r.d.grid.t(k), st.y, st.chart);
    const TensorValue back = pushforward(lhs[k], st.J, st.Y);
    const double consistency = (st.J * st.Y - Mat::Identity(2, 2)).cwiseAbs().maxCoeff();
    CHECK(max_abs(back - direct) <= 4.0 * consistency * (1.0 + max_abs(direct)) + 1e-13);
  }
}

TEST_CASE("expanded integrands vanish consistently for constant fields") {
  ExpandedState s = random_state(kMixed, 1);
  Vec c(4);
  c << 1.0, -2.0, 0.5, 3.0;
  s.K = constant_field(kMixed, 2, c);
  s.G = constant_field(kMixed, 2, c * 0.5);
  s.b = zero_field({1, 0}, 2);
  s.xi = zero_field({1, 0}, 2);
  s.jac = Mat::Identity(2, 2);
  s.inv_jac = Mat::Identity(2, 2);
  const ExpandedCheck e = expanded_integrand_check(s);
  CHECK(e.worst == 0.0);
  CHECK(e.coordinate[HatG1] == 0.0);
  CHECK(e.coordinate[HatG2] == 0.0);
  CHECK(e.coordinate[HatH2] == 0.0);
}

TEST_CASE("expanded integrands match their geometric pairings") {
  double worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 2000; ++seed)
    worst = std::max(worst, expanded_integrand_check(random_state(kMixed, seed)).worst);
  CHECK(worst <= 1e-10);
  for (Valence v : {Valence{0, 1}, Valence{1, 0}, Valence{0, 2}, Valence{2, 1}})
    for (std::uint64_t seed = 1; seed <= 50; ++seed)
      CHECK(expanded_integrand_check(random_state(v, seed)).worst <= 1e-10);
}

TEST_CASE("scalar expanded integrand is b.grad K + xi.grad(xi.grad K)/2") {
  for (std::uint64_t seed = 1; seed <= 200; ++seed) {
    const ExpandedState s = random_state({0, 0}, seed);
    const ExpandedCheck e = expanded_integrand_check(s);
    CHECK(e.worst <= 1e-12);
    // Hand reduction from first and second partials.
    const TensorJet K = s.K->jet(s.t, s.y, 0, 2);
    const TensorJet X = s.xi->jet(s.t, s.y, 0, 1);
    const TensorValue b = s.b->eval(s.t, s.y, 0);
    double bk = 0.0, xk = 0.0, xxk = 0.0;
    for (int k = 0; k < 2; ++k) {
      MultiIndex ek{0, 0, 0};
      ek[k] = 1;
      bk += b[k] * K[0].partial(ek);
      xk += X[k].value() * K[0].partial(ek);
      for (int l = 0; l < 2; ++l) {
        MultiIndex el{0, 0, 0}, ekl{0, 0, 0};
        el[l] = 1;
        ekl[k] += 1;
        ekl[l] += 1;
        xxk += X[l].value() *
               (X[k].partial(el) * K[0].partial(ek) + X[k].value() * K[0].partial(ekl));
      }
    }
    const double want = (bk + 0.5 * xxk) * s.S->eval(s.t, s.x, 0)[0];
    CHECK(e.coordinate[HatG1] == doctest::Approx(want).epsilon(1e-12));
  }
}

TEST_CASE("fit_order is the least-squares slope of -log2") {
  CHECK(fit_order({1.0, 0.5, 0.25, 0.125}) == doctest::Approx(1.0));
  CHECK(fit_order({1.0, 0.0}) != fit_order({1.0, 0.0}));
  CHECK(std::isnan(fit_order({1.0})));
}

TEST_CASE("deterministic scenario converges at first order") {
  const ResidualReport rep = convergence_study(make_scenario("deterministic"), 2);
  CHECK(rep.fitted_order >= 0.9);
  for (std::size_t l = 1; l < rep.levels.size(); ++l)
    CHECK(rep.levels[l].rms_sup_residual < rep.levels[l - 1].rms_sup_residual);
}

TEST_CASE("convergence study is independent of the worker count") {
  Scenario s = make_scenario("kiw_ito_pullback");
  s.paths = 12;
  s.levels = 2;
  const ResidualReport a = convergence_study(s, 1);
  const ResidualReport b = convergence_study(s, 3);
  REQUIRE(a.levels.size() == b.levels.size());
  for (std::size_t l = 0; l < a.levels.size(); ++l) {
    CHECK(a.levels[l].rms_sup_residual == b.levels[l].rms_sup_residual);
    CHECK(a.levels[l].term_l1 == b.levels[l].term_l1);
  }
}

TEST_CASE("blown-up paths are excluded and counted") {
  Scenario s = make_scenario("blowup");
  s.levels = 2;
  const ResidualReport rep = convergence_study(s, 1);
  CHECK(rep.blown_fraction == 1.0);
  CHECK(rep.levels[0].paths_used == 0);
}

TEST_CASE("every built-in scenario passes its own validation") {
  std::set<Theorem> seen;
  for (const CatalogEntry& e : scenario_catalog()) {
    CHECK_NOTHROW(validate(make_scenario(e.name)));
    seen.insert(e.theorem);
  }
  CHECK(seen.size() == all_theorems().size());
}

TEST_CASE("hypothesis violations name the requirement") {
  Scenario push = make_scenario("kiw_ito_pushforward");
  push.sde.b = with_smoothness(push.sde.b, 1);
  try {
    validate(push);
    FAIL("expected HypothesisViolation");
  } catch (const HypothesisViolation& e) {
    CHECK(std::string(e.what()).find("k = 3") != std::string::npos);
    CHECK(std::string(e.what()).find("C^3") != std::string::npos);
  }

  Scenario strat = make_scenario("kiw_strat_pullback");
  strat.G = {time_modulated(random_trig_field(kMixed, 2, 3), TimeProfile::step(0.5))};
  CHECK_THROWS_WITH_AS(validate(strat), doctest::Contains("C^1 in time"), HypothesisViolation);

  Scenario scalar = make_scenario("kiw_ito_pullback");
  scalar.theorem = Theorem::ScalarItoWentzell;
  CHECK_THROWS_AS(validate(scalar), HypothesisViolation);

  Scenario kunita = make_scenario("kiw_ito_pullback");
  kunita.theorem = Theorem::KunitaSecond;
  CHECK_THROWS_WITH_AS(validate(kunita), doctest::Contains("static K"), HypothesisViolation);

  Scenario lowK = make_scenario("kiw_ito_pullback");
  lowK.K0 = with_smoothness(lowK.K0, 1);
  CHECK_THROWS_WITH_AS(validate(lowK), doctest::Contains("K of class C^2"), HypothesisViolation);
}

TEST_CASE("driver wiring is checked") {
  Scenario s = make_scenario("kiw_ito_pullback");
  s.drivers.mart.clear();
  CHECK_THROWS_AS(validate(s), WiringMismatch);
  s = make_scenario("kiw_ito_pullback");
  s.drivers.mart[0].component = 5;
  CHECK_THROWS_AS(validate(s), WiringMismatch);
  s = make_scenario("kiw_ito_pullback");
  s.G = {random_trig_field({0, 1}, 2, 1)};
  CHECK_THROWS_AS(validate(s), ShapeMismatch);
}

TEST_CASE("closed-form and realized brackets agree in the mean") {
  Scenario s = make_scenario("kiw_ito_pullback");
  s.drivers.mart[0].component = 0;  // M = B^1 correlates with the flow noise
  double diff = 0.0;
  const int N = 50;
  for (std::uint32_t p = 0; p < N; ++p) {
    const Run r = run_path(s, p, 2);
    Scenario closed = s;
    closed.bracket = BracketMode::ClosedForm;
    const Transport tr = transport(s, s.theorem, r.fp, r.d, r.K);
    const RhsPath a = assemble_rhs(s, s.theorem, tr, r.d);
    const RhsPath b = assemble_rhs(closed, s.theorem, tr, r.d);
    diff += max_abs(a.values.back() - b.values.back()) / N;
  }
  CHECK(diff > 0.0);
  CHECK(diff < 0.1);
}
