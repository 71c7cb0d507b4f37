#include "kiw/verifier.hpp"

#include <atomic>
#include <cmath>
#include <limits>
#include <thread>

namespace kiw {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Weighted sum of fields, each frozen at its own time.
class FrozenSum final : public TensorField {
 public:
  struct Part {
    FieldPtr field;
    double time;
    double weight;
  };

  FrozenSum(Valence v, int dim, int smoothness, std::vector<Part> parts)
      : TensorField(v, dim, smoothness), parts_(std::move(parts)) {}

  std::string describe() const override { return "K(t)"; }

 protected:
  TensorJet jet_impl(double, const Vec& x, ChartId chart, int order) const override {
    TensorJet out = parts_[0].field->jet(parts_[0].time, x, chart, order) * parts_[0].weight;
    for (std::size_t p = 1; p < parts_.size(); ++p)
      out += parts_[p].field->jet(parts_[p].time, x, chart, order) * parts_[p].weight;
    return out;
  }
  TensorValue eval_impl(double, const Vec& x, ChartId chart) const override {
    TensorValue out = parts_[0].field->eval(parts_[0].time, x, chart) * parts_[0].weight;
    for (std::size_t p = 1; p < parts_.size(); ++p)
      out += parts_[p].field->eval(parts_[p].time, x, chart) * parts_[p].weight;
    return out;
  }
  TensorJet compose_impl(double, std::span<const Jet> x, ChartId chart) const override {
    TensorJet out = parts_[0].field->compose(parts_[0].time, x, chart) * parts_[0].weight;
    for (std::size_t p = 1; p < parts_.size(); ++p)
      out += parts_[p].field->compose(parts_[p].time, x, chart) * parts_[p].weight;
    return out;
  }

 private:
  std::vector<Part> parts_;
};

double bracket_increment(const Scenario& scn, const DrivingPaths& d, int i, int j, int s) {
  if (scn.bracket == BracketMode::ClosedForm) {
    const MartSpec& m = d.spec.mart[i];
    return m.bracket(j, d.grid.t(s + 1)) - m.bracket(j, d.grid.t(s));
  }
  return d.mart[i].increment(s) * d.bm[j].increment(s);
}

Mat values_matrix(const TensorJet& X) {
  const int n = X.dim();
  Mat D(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      MultiIndex e{0, 0, 0};
      e[j] = 1;
      D(i, j) = X[i].partial(e);
    }
  return D;
}

using JetMat = Eigen::Matrix<Jet, Eigen::Dynamic, Eigen::Dynamic>;

JetMat jet_inverse(const JetMat& M) {
  const int n = static_cast<int>(M.rows());
  JetMat out(n, n);
  if (n == 1) {
    out(0, 0) = reciprocal(M(0, 0));
    return out;
  }
  if (n == 2) {
    const Jet inv = reciprocal(M(0, 0) * M(1, 1) - M(0, 1) * M(1, 0));
    out(0, 0) = M(1, 1) * inv;
    out(1, 1) = M(0, 0) * inv;
    out(0, 1) = -M(0, 1) * inv;
    out(1, 0) = -M(1, 0) * inv;
    return out;
  }
  JetMat adj(3, 3);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      const int r0 = (j + 1) % 3, r1 = (j + 2) % 3, c0 = (i + 1) % 3, c1 = (i + 2) % 3;
      adj(i, j) = M(r0, c0) * M(r1, c1) - M(r0, c1) * M(r1, c0);
    }
  const Jet det = M(0, 0) * adj(0, 0) + M(0, 1) * adj(1, 0) + M(0, 2) * adj(2, 0);
  const Jet inv = reciprocal(det);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) out(i, j) = adj(i, j) * inv;
  return out;
}

std::vector<Jet> truncated(const std::vector<Jet>& z, int order) {
  std::vector<Jet> out;
  out.reserve(z.size());
  for (const Jet& j : z) out.push_back(j.truncated(order));
  return out;
}

// Scalar directional derivatives from order-2 jets: X.grad f and
// X.grad (X.grad f).
double directional(const TensorJet& f, const Vec& X) {
  double acc = 0.0;
  for (int k = 0; k < X.size(); ++k) {
    MultiIndex e{0, 0, 0};
    e[k] = 1;
    acc += X[k] * f[0].partial(e);
  }
  return acc;
}

double directional2(const TensorJet& f, const TensorJet& X) {
  const int n = X.dim();
  const Vec v = values_of(X).components();
  const Mat D = values_matrix(X);
  double acc = 0.0;
  for (int l = 0; l < n; ++l)
    for (int k = 0; k < n; ++k) {
      MultiIndex ek{0, 0, 0}, elk{0, 0, 0};
      ek[k] = 1;
      elk[k] += 1;
      elk[l] += 1;
      acc += v[l] * (D(k, l) * f[0].partial(ek) + v[k] * f[0].partial(elk));
    }
  return acc;
}


TensorValue scalar_value(double v, int dim) {
  TensorValue out(Valence{0, 0}, dim);
  out[0] = v;
  return out;
}

}  // namespace

std::string to_string(Theorem t) {
  switch (t) {
    case Theorem::KiwItoPullback:
      return "kiw_ito_pullback";
    case Theorem::KiwItoPushforward:
      return "kiw_ito_pushforward";
    case Theorem::KiwStratPullback:
      return "kiw_strat_pullback";
    case Theorem::KiwStratPushforward:
      return "kiw_strat_pushforward";
    case Theorem::KunitaSecond:
      return "kunita_second";
    case Theorem::KunitaFirst:
      return "kunita_first";
    case Theorem::ScalarItoWentzell:
      return "scalar_ito_wentzell";
  }
  return "";
}

const std::vector<Theorem>& all_theorems() {
  static const std::vector<Theorem> all{
      Theorem::KiwItoPullback, Theorem::KiwItoPushforward, Theorem::KiwStratPullback,
      Theorem::KiwStratPushforward, Theorem::KunitaSecond, Theorem::KunitaFirst,
      Theorem::ScalarItoWentzell};
  return all;
}

Theorem theorem_from_string(const std::string& s) {
  for (Theorem t : all_theorems())
    if (to_string(t) == s) return t;
  throw ConfigError("unknown theorem '" + s + "'");
}

std::string to_string(BracketMode m) {
  return m == BracketMode::Realized ? "realized" : "closed_form";
}

Scheme Scenario::scheme() const {
  return stratonovich() ? Scheme::HeunStratonovich : Scheme::EulerIto;
}

bool Scenario::pushforward() const {
  return theorem == Theorem::KiwItoPushforward || theorem == Theorem::KiwStratPushforward ||
         theorem == Theorem::KunitaFirst;
}

bool Scenario::stratonovich() const {
  return theorem == Theorem::KiwStratPullback || theorem == Theorem::KiwStratPushforward;
}

Requirements requirements(Theorem t) {
  switch (t) {
    case Theorem::KiwItoPullback:
      return {2, 1, 1, 2, false, false, false, false, "Ito pull-back KIW formula (k = 1)"};
    case Theorem::KiwItoPushforward:
      return {2, 1, 3, 4, false, false, false, false, "Ito push-forward KIW formula (k = 3)"};
    case Theorem::KiwStratPullback:
      return {3, 2, 4, 5, true, true, false, false, "Stratonovich pull-back KIW formula (k = 4)"};
    case Theorem::KiwStratPushforward:
      return {3, 2, 4, 5, true, true, false, false,
              "Stratonovich push-forward KIW formula (k = 4)"};
    case Theorem::KunitaSecond:
      return {3, 0, 4, 5, false, false, true, false, "Kunita's second formula (k = 4)"};
    case Theorem::KunitaFirst:
      return {3, 0, 4, 5, false, false, true, false, "Kunita's first formula (k = 4)"};
    case Theorem::ScalarItoWentzell:
      return {2, 1, 1, 2, false, false, false, true, "scalar Ito-Wentzell formula (k = 1)"};
  }
  return {};
}

void validate(const Scenario& scn) {
  if (!scn.K0 || !scn.sde.b || !scn.sde.atlas) throw ShapeMismatch("scenario is incomplete");
  const int n = scn.dim();
  if (scn.K0->dim() != n || scn.x0.size() != n)
    throw ShapeMismatch("K0 and x0 must live on the " + std::to_string(n) + "-dimensional atlas");
  const DriverSpec& d = scn.drivers;
  if (d.fv.size() != scn.G.size() || d.mart.size() != scn.G.size())
    throw WiringMismatch(std::to_string(scn.G.size()) + " G fields need as many fv and martingale " +
                         "drivers (have " + std::to_string(d.fv.size()) + ", " +
                         std::to_string(d.mart.size()) + ")");
  if (scn.sde.noise_dims() > d.brownian_dims)
    throw WiringMismatch("flow uses " + std::to_string(scn.sde.noise_dims()) +
                         " Brownian components, drivers provide " +
                         std::to_string(d.brownian_dims));
  for (const MartSpec& m : d.mart)
    if (m.kind != MartSpec::Kind::Zero && (m.component < 0 || m.component >= d.brownian_dims))
      throw WiringMismatch("martingale driver reads Brownian component " +
                           std::to_string(m.component));
  for (const FieldPtr& g : scn.G)
    if (!g || !(g->valence() == scn.valence()) || g->dim() != n)
      throw ShapeMismatch("each G_i must match the valence of K");
  scn.sde.atlas->chart(scn.chart0);

  const Requirements r = requirements(scn.theorem);
  auto fail = [&](const std::string& what) {
    throw HypothesisViolation(r.label + " requires " + what);
  };
  if (r.scalar && !(scn.valence() == Valence{0, 0}))
    fail("a scalar field K; got valence " + scn.valence().str());
  if (r.static_K && !scn.G.empty()) fail("a static K (no G_i drivers)");
  if (scn.K0->smoothness() < r.K)
    fail("K of class C^" + std::to_string(r.K) + "; " + scn.K0->describe() + " is C^" +
         std::to_string(scn.K0->smoothness()));
  for (const FieldPtr& g : scn.G) {
    if (g->smoothness() < r.G)
      fail("each G_i of class C^" + std::to_string(r.G) + "; " + g->describe() + " is C^" +
           std::to_string(g->smoothness()));
    if (r.G_time_c1 && !g->time_c1()) fail("each G_i to be C^1 in time");
  }
  const std::string sde_need = "b of class C^" + std::to_string(r.b) + " and each xi_j of class C^" +
                               std::to_string(r.xi);
  if (scn.sde.b->smoothness() < r.b)
    fail(sde_need + "; b = " + scn.sde.b->describe() + " is C^" +
         std::to_string(scn.sde.b->smoothness()));
  for (const FieldPtr& xi : scn.sde.xi) {
    if (xi->smoothness() < r.xi)
      fail(sde_need + "; xi = " + xi->describe() + " is C^" + std::to_string(xi->smoothness()));
    if (r.xi_time_c1 && !xi->time_c1()) fail("each xi_j to be C^1 in time");
  }
  check_scheme(scn.sde, scn.scheme());
  if (scn.paths < 1 || scn.levels < 1 || scn.grid.steps < 1 || !(scn.grid.T > 0.0))
    throw ConfigError("paths, levels and steps must be positive");
}

KPath::KPath(const Scenario& scn, const DrivingPaths& d) : grid_(d.grid), K0_(scn.K0) {
  const int L = grid_.steps;
  const bool strat = scn.stratonovich();
  parts_.push_back({scn.K0, 0.0});
  weights_.push_back(std::vector<double>(L + 1, 1.0));
  for (std::size_t i = 0; i < scn.G.size(); ++i) {
    const Path& A = d.fv[i];
    const Path& M = d.mart[i];
    std::vector<SeparablePart> sep;
    if (scn.G[i]->separable(&sep)) {
      for (const SeparablePart& part : sep) {
        std::vector<double> w(L + 1, 0.0);
        for (int s = 0; s < L; ++s) {
          const double a0 = part.profile.value(grid_.t(s));
          const double am = strat ? 0.5 * (a0 + part.profile.value(grid_.t(s + 1))) : a0;
          w[s + 1] = w[s] + a0 * A.increment(s) + am * M.increment(s);
        }
        parts_.push_back({part.spatial, 0.0});
        weights_.push_back(std::move(w));
      }
      continue;
    }
    // Non-separable: one frozen copy of G_i per grid time.
    std::vector<std::vector<double>> w(L + 1, std::vector<double>(L + 1, 0.0));
    for (int s = 0; s < L; ++s) {
      const double dA = A.increment(s), dM = M.increment(s);
      for (int k = s + 1; k <= L; ++k) {
        w[s][k] += dA + (strat ? 0.5 * dM : dM);
        if (strat) w[s + 1][k] += 0.5 * dM;
      }
    }
    for (int s = 0; s <= L; ++s) {
      parts_.push_back({scn.G[i], grid_.t(s)});
      weights_.push_back(std::move(w[s]));
    }
  }
}

FieldPtr KPath::at(int k) const {
  std::vector<FrozenSum::Part> parts;
  int smooth = K0_->smoothness();
  for (std::size_t p = 0; p < parts_.size(); ++p) {
    if (p > 0 && weights_[p][k] == 0.0) continue;
    parts.push_back({parts_[p].field, parts_[p].time, weights_[p][k]});
    smooth = std::min(smooth, parts_[p].field->smoothness());
  }
  return std::make_shared<FrozenSum>(K0_->valence(), K0_->dim(), smooth, std::move(parts));
}

KPath synthesize_K_path(const Scenario& scn, const DrivingPaths& drivers) {
  return KPath(scn, drivers);
}

Transport transport(const Scenario& scn, Theorem theorem, const FlowPath& fp,
                    const DrivingPaths& d, const KPath& K) {
  const bool push = theorem == Theorem::KiwItoPushforward ||
                    theorem == Theorem::KiwStratPushforward || theorem == Theorem::KunitaFirst;
  const bool scalar = theorem == Theorem::ScalarItoWentzell;
  const int N = scn.sde.noise_dims();
  const std::size_t M = scn.G.size();
  const int n = scn.dim();
  Transport tr;
  tr.status = FlowStatus::Completed;

  if (!push) {
    tr.last = fp.last();
    if (fp.status != FlowStatus::Completed) tr.status = fp.status;
    for (int k = 0; k <= tr.last; ++k) {
      const FlowState& st = fp[k];
      const double t = d.grid.t(k);
      const FieldPtr Kk = K.at(k);
      auto pull = [&](const TensorValue& v) { return pullback(v, st.J, st.Y); };
      tr.lhs.push_back(pull(Kk->eval(t, st.y, st.chart)));
      StepIntegrands in;
      const TensorJet Kj = Kk->jet(t, st.y, st.chart, 2);
      const TensorJet bj = scn.sde.b->jet(t, st.y, st.chart, 1);
      std::vector<TensorJet> xj;
      for (int j = 0; j < N; ++j) xj.push_back(scn.sde.xi[j]->jet(t, st.y, st.chart, 2));
      std::vector<TensorJet> gj;
      for (std::size_t i = 0; i < M; ++i) gj.push_back(scn.G[i]->jet(t, st.y, st.chart, 1));
      if (scalar) {
        in.lie_b = scalar_value(directional(Kj, values_of(bj).components()), n);
        for (int j = 0; j < N; ++j) {
          in.lie_xi.push_back(scalar_value(directional(Kj, values_of(xj[j]).components()), n));
          in.lie_xi2.push_back(scalar_value(directional2(Kj, xj[j]), n));
        }
        for (std::size_t i = 0; i < M; ++i) {
          in.G.push_back(values_of(gj[i]));
          in.lie_xi_G.emplace_back();
          for (int j = 0; j < N; ++j)
            in.lie_xi_G[i].push_back(
                scalar_value(directional(gj[i], values_of(xj[j]).components()), n));
        }
      } else {
        in.lie_b = pull(values_of(lie_derivative_jet(Kj, bj, 0)));
        for (int j = 0; j < N; ++j) {
          const TensorJet l1 = lie_derivative_jet(Kj, xj[j], 1);
          in.lie_xi.push_back(pull(values_of(l1)));
          in.lie_xi2.push_back(pull(values_of(lie_derivative_jet(l1, xj[j], 0))));
        }
        for (std::size_t i = 0; i < M; ++i) {
          in.G.push_back(pull(values_of(gj[i])));
          in.lie_xi_G.emplace_back();
          for (int j = 0; j < N; ++j)
            in.lie_xi_G[i].push_back(pull(values_of(lie_derivative_jet(gj[i], xj[j], 0))));
        }
      }
      tr.integrands.push_back(std::move(in));
    }
    return tr;
  }

  // Push-forward: (phi_k)_* K(t_k) around x0 from the Taylor jets of psi_k.
  const Vec& x = scn.x0;
  const ChartId c0 = scn.chart0;
  tr.last = d.grid.steps;
  for (int k = 0; k <= d.grid.steps; ++k) {
    const InverseJets ij = inverse_flow_jets(scn.sde, d, k, x, c0, 3);
    if (ij.status != FlowStatus::Completed) {
      tr.last = k - 1;
      tr.status = ij.status;
      break;
    }
    const double t = d.grid.t(k);
    JetMat Dpsi(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) Dpsi(i, j) = ij.coords[i].derivative(j);
    const JetMat Dphi = jet_inverse(Dpsi);
    const FieldPtr Kk = K.at(k);
    const TensorJet u =
        truncated(transform_tensor(Kk->compose(t, truncated(ij.coords, 2), ij.chart), Dphi, Dpsi),
                  2);
    tr.lhs.push_back(values_of(u));
    StepIntegrands in;
    const TensorJet bj = scn.sde.b->jet(t, x, c0, 1);
    in.lie_b = values_of(lie_derivative_jet(u, bj, 0));
    std::vector<TensorJet> xj;
    for (int j = 0; j < N; ++j) {
      xj.push_back(scn.sde.xi[j]->jet(t, x, c0, 2));
      const TensorJet l1 = lie_derivative_jet(u, xj[j], 1);
      in.lie_xi.push_back(values_of(l1));
      in.lie_xi2.push_back(values_of(lie_derivative_jet(l1, xj[j], 0)));
    }
    const std::vector<Jet> z1 = truncated(ij.coords, 1);
    for (std::size_t i = 0; i < M; ++i) {
      const TensorJet g = truncated(transform_tensor(scn.G[i]->compose(t, z1, ij.chart), Dphi, Dpsi), 1);
      in.G.push_back(values_of(g));
      in.lie_xi_G.emplace_back();
      for (int j = 0; j < N; ++j) in.lie_xi_G[i].push_back(values_of(lie_derivative_jet(g, xj[j], 0)));
    }
    tr.integrands.push_back(std::move(in));
  }
  return tr;
}

std::vector<TensorValue> eval_lhs(const Scenario& scn, const FlowPath& fp,
                                  const DrivingPaths& drivers, const KPath& K) {
  return transport(scn, scn.theorem, fp, drivers, K).lhs;
}

const std::array<const char*, kTermCount>& term_names() {
  static const std::array<const char*, kTermCount> names{
      "g_da", "g_dm", "lie_b", "lie_xi", "lie_xi_g_bracket", "half_lie_xi_xi"};
  return names;
}

RhsPath assemble_rhs(const Scenario& scn, Theorem theorem, const Transport& tr,
                     const DrivingPaths& d) {
  const bool push = theorem == Theorem::KiwItoPushforward ||
                    theorem == Theorem::KiwStratPushforward || theorem == Theorem::KunitaFirst;
  const bool strat = theorem == Theorem::KiwStratPullback || theorem == Theorem::KiwStratPushforward;
  const bool kunita = theorem == Theorem::KunitaSecond || theorem == Theorem::KunitaFirst;
  const double sign = push ? -1.0 : 1.0;
  const int N = scn.sde.noise_dims();
  const std::size_t M = scn.G.size();
  const double h = d.grid.h();

  RhsPath out;
  TensorValue v = scn.K0->eval(0.0, scn.x0, scn.chart0);
  out.values.push_back(v);
  for (int s = 0; s < tr.last; ++s) {
    const StepIntegrands& a = tr.integrands[s];
    const StepIntegrands& b = tr.integrands[s + 1];
    std::array<TensorValue, kTermCount> inc;
    for (TensorValue& t : inc) t = TensorValue(v.valence(), v.dim());
    if (!kunita) {
      for (std::size_t i = 0; i < M; ++i) {
        inc[TermGdA] += a.G[i] * d.fv[i].increment(s);
        const double dM = d.mart[i].increment(s);
        if (strat)
          inc[TermGdM] += (a.G[i] + b.G[i]) * (0.5 * dM);
        else
          inc[TermGdM] += a.G[i] * dM;
      }
    }
    inc[TermLieB] += a.lie_b * (sign * h);
    for (int j = 0; j < N; ++j) {
      const double dB = d.bm[j].increment(s);
      if (strat)
        inc[TermLieXi] += (a.lie_xi[j] + b.lie_xi[j]) * (0.5 * sign * dB);
      else
        inc[TermLieXi] += a.lie_xi[j] * (sign * dB);
    }
    if (!strat) {
      if (!kunita)
        for (std::size_t i = 0; i < M; ++i)
          for (int j = 0; j < N; ++j)
            inc[TermBracket] += a.lie_xi_G[i][j] * (sign * bracket_increment(scn, d, i, j, s));
      for (int j = 0; j < N; ++j) inc[TermHalfLie2] += a.lie_xi2[j] * (0.5 * h);
    }
    for (int term = 0; term < kTermCount; ++term) {
      if (kunita && (term == TermGdA || term == TermGdM || term == TermBracket)) continue;
      v += inc[term];
      out.term_l1[term] += max_abs(inc[term]);
    }
    out.values.push_back(v);
  }
  return out;
}

RhsPath eval_rhs(const Scenario& scn, const FlowPath& fp, const DrivingPaths& drivers,
                 const KPath& K) {
  return assemble_rhs(scn, scn.theorem, transport(scn, scn.theorem, fp, drivers, K), drivers);
}

double sup_residual(const std::vector<TensorValue>& lhs, const std::vector<TensorValue>& rhs) {
  double sup = 0.0;
  const std::size_t n = std::min(lhs.size(), rhs.size());
  for (std::size_t k = 0; k < n; ++k) sup = std::max(sup, max_abs(lhs[k] - rhs[k]));
  return sup;
}

double stratonovich_bridge_defect(const Scenario& scn, const FlowPath& fp,
                                  const DrivingPaths& d, const KPath& K) {
  const bool push = scn.pushforward();
  const Theorem strat = push ? Theorem::KiwStratPushforward : Theorem::KiwStratPullback;
  const Theorem ito = push ? Theorem::KiwItoPushforward : Theorem::KiwItoPullback;
  const Transport tr = transport(scn, strat, fp, d, K);
  const RhsPath rs = assemble_rhs(scn, strat, tr, d);
  const RhsPath ri = assemble_rhs(scn, ito, tr, d);
  const double sign = push ? -1.0 : 1.0;
  const int N = scn.sde.noise_dims();
  const std::size_t M = scn.G.size();
  const int last = tr.last;
  const TimeGrid& g = d.grid;
  const Eigen::Index size = rs.values[0].size();

  // Integrand component paths, held constant past the stop.
  auto component_path = [&](auto get, Eigen::Index f) {
    Path p{g, Vec(g.steps + 1)};
    for (int k = 0; k <= g.steps; ++k) p.values[k] = get(tr.integrands[std::min(k, last)])[f];
    return p;
  };
  auto restricted = [&](const Path& x) {
    Path p = x;
    for (int k = last + 1; k <= g.steps; ++k) p.values[k] = x.values[last];
    return p;
  };

  double worst = 0.0;
  for (Eigen::Index f = 0; f < size; ++f) {
    Vec corr = Vec::Zero(g.steps + 1);
    for (int j = 0; j < N; ++j) {
      const Path X = component_path([j](const StepIntegrands& s) { return s.lie_xi[j]; }, f);
      corr += 0.5 * sign * covariation(X, restricted(d.bm[j])).values;
    }
    for (std::size_t i = 0; i < M; ++i) {
      const Path X = component_path([i](const StepIntegrands& s) { return s.G[i]; }, f);
      corr += 0.5 * covariation(X, restricted(d.mart[i])).values;
    }
    // Ito-only terms enter with the opposite sign.
    double acc = 0.0;
    for (int s = 0; s < last; ++s) {
      const StepIntegrands& a = tr.integrands[s];
      for (int j = 0; j < N; ++j) acc -= 0.5 * g.h() * a.lie_xi2[j][f];
      for (std::size_t i = 0; i < M; ++i)
        for (int j = 0; j < N; ++j)
          acc -= sign * a.lie_xi_G[i][j][f] * bracket_increment(scn, d, static_cast<int>(i), j, s);
      corr[s + 1] += acc;
    }
    for (int k = 0; k <= last; ++k) {
      const double diff = rs.values[k][f] - ri.values[k][f];
      worst = std::max(worst, std::abs(diff - corr[k]));
    }
  }
  return worst;
}

double fit_order(const std::vector<double>& err) {
  const int n = static_cast<int>(err.size());
  if (n < 2) return kNaN;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (int i = 0; i < n; ++i) {
    if (!(err[i] > 0.0) || !std::isfinite(err[i])) return kNaN;
    const double y = -std::log2(err[i]);
    sx += i;
    sy += y;
    sxx += double(i) * i;
    sxy += i * y;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

namespace {

struct PathLevel {
  bool blown = false;
  double residual = 0.0;
  double exact = kNaN;
  std::array<double, kTermCount> term_l1{};
  double jac = 0.0;
};

std::vector<PathLevel> run_path(const Scenario& scn, int p) {
  const RngStream rng(scn.seed, static_cast<std::uint32_t>(p));
  DrivingPaths d = sample_drivers(scn.drivers, scn.grid, rng);
  std::vector<PathLevel> out;
  for (int l = 0; l < scn.levels; ++l) {
    if (l > 0) d = refine_dyadic(d, rng);
    const FlowPath fp = integrate_flow(scn.sde, d, scn.x0, scn.chart0, scn.scheme());
    const KPath K(scn, d);
    const Transport tr = transport(scn, scn.theorem, fp, d, K);
    const RhsPath rhs = assemble_rhs(scn, scn.theorem, tr, d);
    PathLevel r;
    r.blown = tr.status == FlowStatus::BlownUp || fp.status == FlowStatus::BlownUp;
    r.residual = sup_residual(tr.lhs, rhs.values);
    r.term_l1 = rhs.term_l1;
    r.jac = fp.jac_consistency_max;
    if (scn.exact_lhs) {
      double e = 0.0;
      for (int k = 0; k <= tr.last; ++k)
        e = std::max(e, max_abs(scn.exact_lhs(d, k) - rhs.values[k]));
      r.exact = e;
    }
    out.push_back(r);
  }
  return out;
}

}  // namespace

ResidualReport convergence_study(const Scenario& scn, int workers) {
  validate(scn);
  std::vector<std::vector<PathLevel>> results(scn.paths);
  std::vector<std::string> errors(scn.paths);
  std::atomic<int> next{0};
  auto work = [&]() {
    for (int p = next++; p < scn.paths; p = next++) {
      try {
        results[p] = run_path(scn, p);
      } catch (const std::exception& e) {
        errors[p] = e.what();
      }
    }
  };
  workers = std::max(1, std::min(workers, scn.paths));
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (std::thread& t : pool) t.join();
  }
  for (const std::string& e : errors)
    if (!e.empty()) throw Error(e);

  ResidualReport rep;
  rep.scenario = scn.name;
  rep.theorem = scn.theorem;
  rep.paths = scn.paths;
  std::vector<double> rms, exact;
  for (int l = 0; l < scn.levels; ++l) {
    LevelStats st;
    st.level = l;
    st.steps = scn.grid.steps << l;
    st.h = scn.grid.T / st.steps;
    double ss = 0.0, se = 0.0;
    for (int p = 0; p < scn.paths; ++p) {
      const PathLevel& r = results[p][l];
      if (r.blown) {
        ++st.blown_up;
        continue;
      }
      ++st.paths_used;
      ss += r.residual * r.residual;
      se += r.exact * r.exact;
      for (int t = 0; t < kTermCount; ++t) st.term_l1[t] += r.term_l1[t];
      st.jac_consistency_max = std::max(st.jac_consistency_max, r.jac);
    }
    const double used = std::max(st.paths_used, 1);
    st.rms_sup_residual = st.paths_used ? std::sqrt(ss / used) : kNaN;
    st.rms_sup_exact_error = scn.exact_lhs && st.paths_used ? std::sqrt(se / used) : kNaN;
    for (double& t : st.term_l1) t /= used;
    st.local_order = l == 0 ? kNaN : std::log2(rms.back() / st.rms_sup_residual);
    rms.push_back(st.rms_sup_residual);
    exact.push_back(st.rms_sup_exact_error);
    rep.levels.push_back(st);
  }
  rep.fitted_order = fit_order(rms);
  rep.exact_fitted_order = scn.exact_lhs ? fit_order(exact) : kNaN;
  rep.blown_fraction = double(rep.levels.back().blown_up) / scn.paths;
  return rep;
}

}  // namespace kiw
