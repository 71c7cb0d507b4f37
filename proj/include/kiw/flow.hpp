#pragma once

#include <memory>
#include <string>
#include <vector>

#include "kiw/field.hpp"
#include "kiw/geometry.hpp"
#include "kiw/stochastics.hpp"

namespace kiw {

enum class Scheme { EulerIto, HeunStratonovich };
enum class FlowStatus { Running, ExitedChart, BlownUp, Completed };

std::string to_string(Scheme s);
std::string to_string(FlowStatus s);

// dX = b(t,X) dt + sum_j xi_j(t,X) o dB^j on a chart atlas.
struct FlowSDE {
  FieldPtr b;
  std::vector<FieldPtr> xi;
  std::shared_ptr<const ChartAtlas> atlas;
  double r_max = 1e6;
  bool allow_hops = true;

  int dim() const { return atlas->dim(); }
  int noise_dims() const { return static_cast<int>(xi.size()); }
};

struct FlowState {
  ChartId chart = 0;
  Vec y;
  Mat J;  // D phi
  Mat Y;  // D psi at phi
};

struct ChartHop {
  int step;
  double t;
  ChartId from;
  ChartId to;
};

struct FlowPath {
  TimeGrid grid;
  Scheme scheme = Scheme::EulerIto;
  std::vector<FlowState> states;  // indices 0..last()
  FlowStatus status = FlowStatus::Running;
  std::vector<ChartHop> hops;
  double jac_consistency_max = 0.0;

  // Last grid index with a valid state (the stopping index).
  int last() const { return static_cast<int>(states.size()) - 1; }
  const FlowState& operator[](int k) const { return states[k]; }
  const FlowState& last_state() const { return states.back(); }
  JacobianData jacobian(int k) const;
};

struct CorrectionTerms {
  Mat c_plus;
  Mat c_minus;
};

// C+ = 1/2 D(xi . grad xi) and C- = 1/2 (Dxi Dxi - xi . grad Dxi), summed over j.
CorrectionTerms strat_to_ito_correction(const std::vector<FieldPtr>& xi, double t, const Vec& y,
                                        ChartId chart);

// Checks scheme-specific requirements on the coefficients.
void check_scheme(const FlowSDE& sde, Scheme scheme);

FlowPath integrate_flow(const FlowSDE& sde, const DrivingPaths& drivers, const Vec& x0,
                        ChartId chart0, Scheme scheme);

// Continues from `start` at grid index k_begin; the result holds the states
// for grid indices k_begin..k_end.
FlowPath integrate_flow_window(const FlowSDE& sde, const DrivingPaths& drivers,
                               const FlowState& start, int k_begin, int k_end, Scheme scheme);

// Re-expresses the state in chart `to`.
FlowState chart_hop(const FlowState& state, const ChartAtlas& atlas, ChartId to);

// |psi_t(phi_t(x)) - x| on the grid, with psi integrated backward from each
// (t_k, phi_k) by the inverse of the forward scheme. NaN past the stop.
Path inverse_flow_residual(const FlowPath& fp, const FlowSDE& sde, const DrivingPaths& drivers);

// psi_{t_k} as Taylor jets in the coordinates around x (chart `chart`),
// integrated backward by Heun steps with jet-valued state.
struct InverseJets {
  ChartId chart = 0;
  std::vector<Jet> coords;
  FlowStatus status = FlowStatus::Completed;
};
InverseJets inverse_flow_jets(const FlowSDE& sde, const DrivingPaths& drivers, int k,
                              const Vec& x, ChartId chart, int order);

}  // namespace kiw
