#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "kiw/field.hpp"
#include "kiw/flow.hpp"
#include "kiw/stochastics.hpp"

namespace kiw {

enum class Theorem {
  KiwItoPullback,
  KiwItoPushforward,
  KiwStratPullback,
  KiwStratPushforward,
  KunitaSecond,
  KunitaFirst,
  ScalarItoWentzell,
};

std::string to_string(Theorem t);
Theorem theorem_from_string(const std::string& s);
const std::vector<Theorem>& all_theorems();

enum class BracketMode { Realized, ClosedForm };
std::string to_string(BracketMode m);

// K(t,x) = K0(x) + sum_i int G_i dA^i + sum_i int G_i dM^i, transported by
// the flow of `sde` from x0.
struct Scenario {
  std::string name;
  std::string description;
  Theorem theorem = Theorem::KiwItoPullback;
  std::string atlas = "euclidean";
  FlowSDE sde;
  FieldPtr K0;
  std::vector<FieldPtr> G;
  DriverSpec drivers;
  Vec x0;
  ChartId chart0 = 0;
  TimeGrid grid{1.0, 64};
  int paths = 200;
  int levels = 4;
  std::uint64_t seed = 1;
  BracketMode bracket = BracketMode::Realized;
  // Closed-form LHS at grid index k, when known.
  std::function<TensorValue(const DrivingPaths&, int)> exact_lhs;

  Scheme scheme() const;
  bool pushforward() const;
  bool stratonovich() const;
  int dim() const { return sde.dim(); }
  Valence valence() const { return K0->valence(); }
};

// Smoothness and shape hypotheses of the selected theorem. Throws
// HypothesisViolation naming the requirement, or WiringMismatch/ShapeMismatch.
void validate(const Scenario& scn);

// Regularity the selected theorem demands of (K, G, b, xi).
struct Requirements {
  int K = 0;
  int G = 0;
  int b = 0;
  int xi = 0;
  bool xi_time_c1 = false;
  bool G_time_c1 = false;
  bool static_K = false;
  bool scalar = false;
  std::string label;
};
Requirements requirements(Theorem t);

// Pathwise realization of K(t_k, .) on the grid of `drivers`. Separable G_i
// collapse to running weights; other G_i are summed lazily at query points.
class KPath {
 public:
  KPath(const Scenario& scn, const DrivingPaths& drivers);
  FieldPtr at(int k) const;
  int steps() const { return grid_.steps; }

 private:
  struct Part {
    FieldPtr field;
    double time;
  };
  TimeGrid grid_;
  FieldPtr K0_;
  std::vector<Part> parts_;
  // weights_[p][k]: coefficient of part p in K(t_k).
  std::vector<std::vector<double>> weights_;
};

KPath synthesize_K_path(const Scenario& scn, const DrivingPaths& drivers);

// Per-step integrands of the right-hand side, already transported to x0.
struct StepIntegrands {
  std::vector<TensorValue> G;                    // [i]
  TensorValue lie_b;
  std::vector<TensorValue> lie_xi;               // [j]
  std::vector<std::vector<TensorValue>> lie_xi_G;  // [i][j]
  std::vector<TensorValue> lie_xi2;              // [j], L_xi_j L_xi_j
};

// Transported quantities along one path, up to the stopping index.
struct Transport {
  std::vector<TensorValue> lhs;
  std::vector<StepIntegrands> integrands;
  int last = 0;
  FlowStatus status = FlowStatus::Completed;
};

Transport transport(const Scenario& scn, Theorem theorem, const FlowPath& fp,
                    const DrivingPaths& drivers, const KPath& K);

std::vector<TensorValue> eval_lhs(const Scenario& scn, const FlowPath& fp,
                                  const DrivingPaths& drivers, const KPath& K);

enum Term { TermGdA, TermGdM, TermLieB, TermLieXi, TermBracket, TermHalfLie2, kTermCount };
const std::array<const char*, kTermCount>& term_names();

struct RhsPath {
  std::vector<TensorValue> values;
  std::array<double, kTermCount> term_l1{};
};

RhsPath assemble_rhs(const Scenario& scn, Theorem theorem, const Transport& tr,
                     const DrivingPaths& drivers);
RhsPath eval_rhs(const Scenario& scn, const FlowPath& fp, const DrivingPaths& drivers,
                 const KPath& K);

double sup_residual(const std::vector<TensorValue>& lhs, const std::vector<TensorValue>& rhs);

// Stratonovich RHS minus Ito RHS against the discrete half-covariation
// corrections, both assembled on the same flow path. Returns the max
// deviation over grid and components.
double stratonovich_bridge_defect(const Scenario& scn, const FlowPath& fp,
                                  const DrivingPaths& drivers, const KPath& K);

// One state of the pairing F = <phi^* K, S> with every ingredient given.
struct ExpandedState {
  double t = 0.0;
  Vec x;      // base point, where S is evaluated
  Vec y;      // image point phi(x)
  Mat jac;    // D phi(x)
  Mat inv_jac;  // D psi(phi(x))
  ChartId chart = 0;
  FieldPtr K, G, S, b, xi;
};

enum Hatted { HatG1, HatG2, HatG3, HatH1, HatH2, kHatCount };
const std::array<const char*, kHatCount>& hatted_names();

struct ExpandedCheck {
  std::array<double, kHatCount> coordinate{};
  std::array<double, kHatCount> geometric{};
  std::array<double, kHatCount> deviation{};
  double worst = 0.0;
};

// Evaluates the integrands of dF from their coordinate expansions and from
// the geometric pairings they equal; deviation is relative with floor 1.
ExpandedCheck expanded_integrand_check(const ExpandedState& s);

struct LevelStats {
  int level = 0;
  int steps = 0;
  double h = 0.0;
  int paths_used = 0;
  int blown_up = 0;
  double rms_sup_residual = 0.0;
  double local_order = 0.0;
  double rms_sup_exact_error = 0.0;
  std::array<double, kTermCount> term_l1{};
  double jac_consistency_max = 0.0;
};

struct ResidualReport {
  std::string scenario;
  Theorem theorem = Theorem::KiwItoPullback;
  int paths = 0;
  std::vector<LevelStats> levels;
  double fitted_order = 0.0;
  double exact_fitted_order = 0.0;
  double blown_fraction = 0.0;
};

// Least-squares slope of -log2(err) against the level index.
double fit_order(const std::vector<double>& err);

ResidualReport convergence_study(const Scenario& scn, int workers = 1);

}  // namespace kiw
