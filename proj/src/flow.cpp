#include "kiw/flow.hpp"

#include <Eigen/LU>

#include <cmath>

namespace kiw {

namespace {

Mat jacobian_of(const TensorJet& X) {
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

struct Coefficients {
  Vec b;
  Mat Db;
  std::vector<Vec> xi;
  std::vector<Mat> Dxi;
  std::vector<TensorJet> xi_jets;
};

Coefficients evaluate(const FlowSDE& sde, double t, const Vec& y, ChartId chart, int xi_order) {
  Coefficients c;
  const TensorJet bj = sde.b->jet(t, y, chart, 1);
  c.b = values_of(bj).components();
  c.Db = jacobian_of(bj);
  for (const FieldPtr& xi : sde.xi) {
    TensorJet j = xi->jet(t, y, chart, xi_order);
    c.xi.push_back(values_of(j).components());
    c.Dxi.push_back(jacobian_of(j));
    c.xi_jets.push_back(std::move(j));
  }
  return c;
}

CorrectionTerms corrections_from(const std::vector<TensorJet>& jets, int n, Vec* drift) {
  CorrectionTerms ct{Mat::Zero(n, n), Mat::Zero(n, n)};
  if (drift) *drift = Vec::Zero(n);
  for (const TensorJet& xj : jets) {
    const Vec v = values_of(xj).components();
    const Mat D = jacobian_of(xj);
    const Mat DD = D * D;
    Mat second = Mat::Zero(n, n);  // (i,j): xi^k d_j d_k xi^i
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) {
          MultiIndex a{0, 0, 0};
          ++a[j];
          ++a[k];
          second(i, j) += v[k] * xj[i].partial(a);
        }
    ct.c_plus += 0.5 * (DD + second);
    ct.c_minus += 0.5 * (DD - second);
    if (drift) *drift += 0.5 * D * v;
  }
  return ct;
}

bool finite(const Vec& v) { return v.allFinite(); }

class Stepper {
 public:
  Stepper(const FlowSDE& sde, const DrivingPaths& drivers, Scheme scheme)
      : sde_(sde), d_(drivers), scheme_(scheme), n_(sde.dim()) {}

  FlowState step(const FlowState& s, int k) const {
    const double t = d_.grid.t(k);
    const double h = d_.grid.h();
    std::vector<double> dB(sde_.noise_dims());
    for (int j = 0; j < sde_.noise_dims(); ++j) dB[j] = d_.bm[j].increment(k);
    FlowState o;
    o.chart = s.chart;
    if (scheme_ == Scheme::EulerIto) {
      const Coefficients c = evaluate(sde_, t, s.y, s.chart, 2);
      Vec drift;
      const CorrectionTerms ct = corrections_from(c.xi_jets, n_, &drift);
      Vec dy = (c.b + drift) * h;
      Mat A = (c.Db + ct.c_plus) * h;
      Mat B = (c.Db - ct.c_minus) * h;
      for (int j = 0; j < sde_.noise_dims(); ++j) {
        dy += c.xi[j] * dB[j];
        A += c.Dxi[j] * dB[j];
        B += c.Dxi[j] * dB[j];
      }
      o.y = s.y + dy;
      o.J = s.J + A * s.J;
      o.Y = s.Y - s.Y * B;
      return o;
    }
    const Coefficients c = evaluate(sde_, t, s.y, s.chart, 1);
    Vec dy = c.b * h;
    Mat A = c.Db * h;
    for (int j = 0; j < sde_.noise_dims(); ++j) {
      dy += c.xi[j] * dB[j];
      A += c.Dxi[j] * dB[j];
    }
    const Vec yp = s.y + dy;
    const Mat Jp = s.J + A * s.J;
    const Mat Yp = s.Y - s.Y * A;
    const Coefficients cp = evaluate(sde_, d_.grid.t(k + 1), yp, s.chart, 1);
    Vec dy2 = (c.b + cp.b) * (0.5 * h);
    Mat AJ = (c.Db * s.J + cp.Db * Jp) * (0.5 * h);
    Mat YA = (s.Y * c.Db + Yp * cp.Db) * (0.5 * h);
    for (int j = 0; j < sde_.noise_dims(); ++j) {
      dy2 += (c.xi[j] + cp.xi[j]) * (0.5 * dB[j]);
      AJ += (c.Dxi[j] * s.J + cp.Dxi[j] * Jp) * (0.5 * dB[j]);
      YA += (s.Y * c.Dxi[j] + Yp * cp.Dxi[j]) * (0.5 * dB[j]);
    }
    o.y = s.y + dy2;
    o.J = s.J + AJ;
    o.Y = s.Y - YA;
    return o;
  }

 private:
  const FlowSDE& sde_;
  const DrivingPaths& d_;
  Scheme scheme_;
  int n_;
};

// Applies blow-up, hop and exit rules after a step. Returns the status to
// continue with (Running) or stop.
FlowStatus settle(const FlowSDE& sde, FlowState& s, int k, double t, std::vector<ChartHop>& hops) {
  if (!finite(s.y) || s.y.cwiseAbs().maxCoeff() > sde.r_max) return FlowStatus::BlownUp;
  const Chart& ch = sde.atlas->chart(s.chart);
  const double dist = ch.distance(s.y);
  if (dist < ch.radius_v()) return FlowStatus::Running;
  if (!sde.allow_hops) return dist < ch.radius_u() ? FlowStatus::Running : FlowStatus::ExitedChart;
  ChartId to;
  try {
    to = locate_chart(*sde.atlas, s.y, s.chart);
  } catch (const NoCoveringChart&) {
    return FlowStatus::BlownUp;
  }
  hops.push_back({k, t, s.chart, to});
  s = chart_hop(s, *sde.atlas, to);
  if (!finite(s.y) || s.y.cwiseAbs().maxCoeff() > sde.r_max) return FlowStatus::BlownUp;
  return FlowStatus::Running;
}

}  // namespace

std::string to_string(Scheme s) {
  return s == Scheme::EulerIto ? "euler_ito" : "heun_stratonovich";
}

std::string to_string(FlowStatus s) {
  switch (s) {
    case FlowStatus::Running:
      return "running";
    case FlowStatus::ExitedChart:
      return "exited_chart";
    case FlowStatus::BlownUp:
      return "blown_up";
    case FlowStatus::Completed:
      return "completed";
  }
  return "";
}

JacobianData FlowPath::jacobian(int k) const {
  if (k > last()) throw FlowStopped("flow stopped at step " + std::to_string(last()));
  return {states[k].J, states[k].Y, states[0].y, states[k].y};
}

CorrectionTerms strat_to_ito_correction(const std::vector<FieldPtr>& xi, double t, const Vec& y,
                                        ChartId chart) {
  std::vector<TensorJet> jets;
  for (const FieldPtr& f : xi) jets.push_back(f->jet(t, y, chart, 2));
  return corrections_from(jets, static_cast<int>(y.size()), nullptr);
}

void check_scheme(const FlowSDE& sde, Scheme scheme) {
  for (const FieldPtr& f : sde.xi) {
    if (f->dim() != sde.dim() || !(f->valence() == Valence{1, 0}))
      throw ShapeMismatch("diffusion fields must be vector fields on the atlas");
    if (scheme == Scheme::HeunStratonovich && !f->time_c1())
      throw SchemeSmoothnessMismatch("Heun (Stratonovich) needs every xi_j to be C^1 in time; " +
                                     f->describe() + " is not");
  }
  if (sde.b->dim() != sde.dim() || !(sde.b->valence() == Valence{1, 0}))
    throw ShapeMismatch("drift must be a vector field on the atlas");
}

FlowState chart_hop(const FlowState& s, const ChartAtlas& atlas, ChartId to) {
  if (to == s.chart) return s;
  const Mat T = atlas.transition_jacobian(s.chart, to, s.y);
  FlowState o;
  o.chart = to;
  o.y = transition(atlas, s.chart, to, s.y);
  o.J = T * s.J;
  o.Y = s.Y * T.inverse();
  return o;
}

FlowPath integrate_flow_window(const FlowSDE& sde, const DrivingPaths& drivers,
                               const FlowState& start, int k_begin, int k_end, Scheme scheme) {
  check_scheme(sde, scheme);
  if (static_cast<int>(drivers.bm.size()) < sde.noise_dims())
    throw WiringMismatch("flow needs " + std::to_string(sde.noise_dims()) +
                         " Brownian components, drivers have " + std::to_string(drivers.bm.size()));
  FlowPath fp;
  fp.grid = drivers.grid;
  fp.scheme = scheme;
  fp.states.reserve(k_end - k_begin + 1);
  fp.states.push_back(start);
  const Stepper stepper(sde, drivers, scheme);
  const int n = sde.dim();
  fp.jac_consistency_max = (start.J * start.Y - Mat::Identity(n, n)).cwiseAbs().maxCoeff();
  FlowState s = start;
  for (int k = k_begin; k < k_end; ++k) {
    FlowState next = stepper.step(s, k);
    const FlowStatus st = settle(sde, next, k + 1, drivers.grid.t(k + 1), fp.hops);
    if (st != FlowStatus::Running) {
      fp.status = st;
      return fp;
    }
    fp.jac_consistency_max = std::max(
        fp.jac_consistency_max, (next.J * next.Y - Mat::Identity(n, n)).cwiseAbs().maxCoeff());
    fp.states.push_back(next);
    s = std::move(next);
  }
  fp.status = FlowStatus::Completed;
  return fp;
}

FlowPath integrate_flow(const FlowSDE& sde, const DrivingPaths& drivers, const Vec& x0,
                        ChartId chart0, Scheme scheme) {
  locate_chart(*sde.atlas, x0, chart0);
  const int n = sde.dim();
  const FlowState start{chart0, x0, Mat::Identity(n, n), Mat::Identity(n, n)};
  return integrate_flow_window(sde, drivers, start, 0, drivers.grid.steps, scheme);
}

}  // namespace kiw
