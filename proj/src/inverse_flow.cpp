#include <cmath>
#include <limits>
#include <type_traits>

#include "kiw/flow.hpp"

namespace kiw {

namespace {

// Drift-corrected coefficients for one backward Euler step at (t, z).
Vec backward_euler(const FlowSDE& sde, const DrivingPaths& d, int m, const Vec& z, ChartId chart) {
  const double t = d.grid.t(m + 1);
  const double h = d.grid.h();
  Vec out = z - sde.b->eval(t, z, chart).components() * h;
  std::vector<TensorJet> jets;
  for (int j = 0; j < sde.noise_dims(); ++j) {
    const TensorJet xj = sde.xi[j]->jet(t, z, chart, 1);
    const Vec v = values_of(xj).components();
    Vec c = Vec::Zero(z.size());
    for (int i = 0; i < z.size(); ++i)
      for (int k = 0; k < z.size(); ++k) {
        MultiIndex e{0, 0, 0};
        e[k] = 1;
        c[i] += 0.5 * v[k] * xj[i].partial(e);
      }
    out += c * h - v * d.bm[j].increment(m);
  }
  return out;
}

template <typename S, typename Eval>
std::vector<S> backward_heun(const FlowSDE& sde, const DrivingPaths& d, int m,
                             const std::vector<S>& z, ChartId chart, Eval eval) {
  const double h = d.grid.h();
  const int n = sde.dim();
  const auto b0 = eval(*sde.b, d.grid.t(m + 1), z, chart);
  std::vector<S> zp(n);
  for (int i = 0; i < n; ++i) zp[i] = z[i] - b0[i] * h;
  std::vector<std::remove_cv_t<decltype(b0)>> x0;
  for (int j = 0; j < sde.noise_dims(); ++j) {
    x0.push_back(eval(*sde.xi[j], d.grid.t(m + 1), z, chart));
    const double dB = d.bm[j].increment(m);
    for (int i = 0; i < n; ++i) zp[i] -= x0[j][i] * dB;
  }
  const auto b1 = eval(*sde.b, d.grid.t(m), zp, chart);
  std::vector<S> out(n);
  for (int i = 0; i < n; ++i) out[i] = z[i] - (b0[i] + b1[i]) * (0.5 * h);
  for (int j = 0; j < sde.noise_dims(); ++j) {
    const auto x1 = eval(*sde.xi[j], d.grid.t(m), zp, chart);
    const double dB = d.bm[j].increment(m);
    for (int i = 0; i < n; ++i) out[i] -= (x0[j][i] + x1[i]) * (0.5 * dB);
  }
  return out;
}

auto eval_values = [](const TensorField& f, double t, const std::vector<double>& z, ChartId c) {
  return f.eval(t, Eigen::Map<const Vec>(z.data(), z.size()), c);
};

auto eval_jets = [](const TensorField& f, double t, const std::vector<Jet>& z, ChartId c) {
  return f.compose(t, z, c);
};

// Hop rule shared by both value and jet integrations; false on blow-up.
template <typename S>
bool settle_backward(const FlowSDE& sde, std::vector<S>& z, ChartId& chart) {
  Vec v(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) v[i] = value_of(z[i]);
  if (!v.allFinite() || v.cwiseAbs().maxCoeff() > sde.r_max) return false;
  const Chart& ch = sde.atlas->chart(chart);
  if (ch.distance(v) < ch.radius_v()) return true;
  ChartId to;
  try {
    to = locate_chart(*sde.atlas, v, chart);
  } catch (const NoCoveringChart&) {
    return false;
  }
  std::vector<S> out(z.size());
  sde.atlas->transition<S>(chart, to, z, out);
  z = std::move(out);
  chart = to;
  return true;
}

}  // namespace

Path inverse_flow_residual(const FlowPath& fp, const FlowSDE& sde, const DrivingPaths& drivers) {
  Path res{drivers.grid, Vec::Constant(drivers.grid.steps + 1,
                                       std::numeric_limits<double>::quiet_NaN())};
  const Vec& x0 = fp[0].y;
  const ChartId c0 = fp[0].chart;
  for (int k = 0; k <= fp.last(); ++k) {
    ChartId chart = fp[k].chart;
    std::vector<double> z(fp[k].y.data(), fp[k].y.data() + fp[k].y.size());
    bool ok = true;
    for (int m = k - 1; m >= 0 && ok; --m) {
      if (fp.scheme == Scheme::EulerIto) {
        const Vec next = backward_euler(sde, drivers, m, Eigen::Map<const Vec>(z.data(), z.size()), chart);
        z.assign(next.data(), next.data() + next.size());
      } else {
        z = backward_heun(sde, drivers, m, z, chart, [](const TensorField& f, double t,
                                                         const std::vector<double>& zz, ChartId c) {
          return eval_values(f, t, zz, c);
        });
      }
      ok = settle_backward(sde, z, chart);
    }
    if (!ok) continue;
    Vec zv = Eigen::Map<const Vec>(z.data(), z.size());
    if (chart != c0) zv = transition(*sde.atlas, chart, c0, zv);
    res.values[k] = (zv - x0).norm();
  }
  return res;
}

InverseJets inverse_flow_jets(const FlowSDE& sde, const DrivingPaths& drivers, int k,
                              const Vec& x, ChartId chart, int order) {
  const int n = sde.dim();
  const JetLayout& L = JetLayout::get(n, order);
  InverseJets out;
  out.chart = chart;
  out.coords.resize(n);
  for (int i = 0; i < n; ++i) out.coords[i] = Jet::variable(L, i, x[i]);
  for (int m = k - 1; m >= 0; --m) {
    out.coords = backward_heun(sde, drivers, m, out.coords, out.chart, eval_jets);
    if (!settle_backward(sde, out.coords, out.chart)) {
      out.status = FlowStatus::BlownUp;
      return out;
    }
  }
  out.status = FlowStatus::Completed;
  return out;
}

}  // namespace kiw
