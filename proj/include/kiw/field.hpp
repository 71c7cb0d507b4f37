#pragma once

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "kiw/geometry.hpp"
#include "kiw/tensor.hpp"

namespace kiw {

// Smoothness declared by analytic fields. Jets are still capped by
// JetLayout::kMaxOrder.
inline constexpr int kAnalytic = 64;

struct TimeProfile {
  std::string name = "1";
  std::function<double(double)> value = [](double) { return 1.0; };
  bool c1 = true;

  static TimeProfile constant(double c);
  static TimeProfile linear(double c0, double c1);
  static TimeProfile cosine(double amplitude, double omega);
  static TimeProfile exponential(double rate);
  static TimeProfile step(double at);
};

class TensorField;
using FieldPtr = std::shared_ptr<const TensorField>;

struct SeparablePart {
  TimeProfile profile;
  FieldPtr spatial;
};

// A time-dependent tensor field given chart-wise by its components, with
// analytic spatial derivatives up to smoothness() delivered as Taylor jets.
class TensorField : public std::enable_shared_from_this<TensorField> {
 public:
  TensorField(Valence valence, int dim, int smoothness, bool time_c1 = true)
      : valence_(valence), dim_(dim), smoothness_(smoothness), time_c1_(time_c1) {}
  virtual ~TensorField() = default;

  Valence valence() const { return valence_; }
  int dim() const { return dim_; }
  int smoothness() const { return smoothness_; }
  bool time_c1() const { return time_c1_; }

  TensorValue eval(double t, const Vec& x, ChartId chart) const { return eval_impl(t, x, chart); }
  // Taylor jet of the components at x; throws InsufficientSmoothness when
  // order exceeds the declared smoothness.
  TensorJet jet(double t, const Vec& x, ChartId chart, int order) const;
  TensorValue partial(double t, const Vec& x, ChartId chart, const MultiIndex& alpha) const;
  // Components at jet-valued coordinates (composition with a smooth map).
  TensorJet compose(double t, std::span<const Jet> x, ChartId chart) const;

  // Decomposition sum_m a_m(t) F_m(x) when the field has one.
  virtual bool separable(std::vector<SeparablePart>* parts) const;
  virtual std::string describe() const = 0;

 protected:
  virtual TensorJet jet_impl(double t, const Vec& x, ChartId chart, int order) const = 0;
  virtual TensorValue eval_impl(double t, const Vec& x, ChartId chart) const;
  virtual TensorJet compose_impl(double t, std::span<const Jet> x, ChartId chart) const;
  void require_order(int order) const;

 private:
  Valence valence_;
  int dim_;
  int smoothness_;
  bool time_c1_;
};

// Field from a generic component formula
//   f(double t, std::span<const S> x, ChartId chart, std::span<S> out)
// instantiated for S = double and S = Jet. Formulas that read t must be
// created with static_in_time = false.
template <typename Formula>
class FormulaField final : public TensorField {
 public:
  FormulaField(std::string name, Valence valence, int dim, Formula f, int smoothness = kAnalytic,
               bool static_in_time = true)
      : TensorField(valence, dim, smoothness),
        name_(std::move(name)),
        f_(std::move(f)),
        static_(static_in_time) {}

  std::string describe() const override { return name_; }
  bool separable(std::vector<SeparablePart>* parts) const override {
    if (!static_) return false;
    if (parts) parts->push_back({TimeProfile{}, shared_from_this()});
    return true;
  }

 protected:
  TensorJet jet_impl(double t, const Vec& x, ChartId chart, int order) const override {
    const JetLayout& L = JetLayout::get(dim(), order);
    std::array<Jet, JetLayout::kMaxVars> xs;
    for (int i = 0; i < dim(); ++i) xs[i] = Jet::variable(L, i, x[i]);
    return compose_impl(t, std::span<const Jet>(xs.data(), dim()), chart);
  }
  TensorValue eval_impl(double t, const Vec& x, ChartId chart) const override {
    TensorValue out(valence(), dim());
    f_(t, std::span<const double>(x.data(), dim()), chart,
       std::span<double>(out.components().data(), out.size()));
    return out;
  }
  TensorJet compose_impl(double t, std::span<const Jet> x, ChartId chart) const override {
    TensorJet out(valence(), dim());
    f_(t, x, chart, std::span<Jet>(out.components().data(), out.size()));
    return out;
  }

 private:
  std::string name_;
  Formula f_;
  bool static_;
};

template <typename Formula>
FieldPtr make_formula_field(std::string name, Valence valence, int dim, Formula f,
                            int smoothness = kAnalytic, bool static_in_time = true) {
  return std::make_shared<FormulaField<Formula>>(std::move(name), valence, dim, std::move(f),
                                                 smoothness, static_in_time);
}

// L_X K as a field of smoothness out_order.
FieldPtr lie_derivative(FieldPtr K, FieldPtr X, int out_order);

// Polynomial field given by Taylor coefficients around a fixed center.
FieldPtr taylor_field(const TensorJet& poly, const Vec& center, std::string name = "taylor");

// Value of L_X K at x from order-1 jets of K and X.
TensorValue lie_derivative_value(const TensorField& K, const TensorField& X, double t,
                                 const Vec& x, ChartId chart);

// Flow-based oracle: (phi_eps^* K - phi_{-eps}^* K) / (2 eps) with phi the
// time-frozen flow of X, integrated by RK4 together with its Jacobian.
TensorValue lie_derivative_fd_oracle(const TensorField& K, const TensorField& X, double t,
                                     const Vec& x, ChartId chart, double eps);

}  // namespace kiw
