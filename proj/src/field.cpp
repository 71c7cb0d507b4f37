#include "kiw/field.hpp"

#include <Eigen/LU>

#include <cmath>
#include <sstream>

namespace kiw {

namespace {

std::string fmt_num(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

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

class LieDerivativeField final : public TensorField {
 public:
  LieDerivativeField(FieldPtr K, FieldPtr X, int out_order)
      : TensorField(K->valence(), K->dim(), out_order, K->time_c1() && X->time_c1()),
        K_(std::move(K)),
        X_(std::move(X)) {}

  std::string describe() const override {
    return "lie(" + K_->describe() + ", " + X_->describe() + ")";
  }
  bool separable(std::vector<SeparablePart>*) const override { return false; }

 protected:
  TensorJet jet_impl(double t, const Vec& x, ChartId chart, int order) const override {
    return lie_derivative_jet(K_->jet(t, x, chart, order + 1), X_->jet(t, x, chart, order + 1),
                              order);
  }

 private:
  FieldPtr K_;
  FieldPtr X_;
};

class TaylorField final : public TensorField {
 public:
  TaylorField(const TensorJet& poly, const Vec& center, std::string name)
      : TensorField(poly.valence(), poly.dim(), kAnalytic),
        poly_(poly),
        center_(center),
        name_(std::move(name)) {}

  std::string describe() const override { return name_; }

 protected:
  TensorJet jet_impl(double t, const Vec& x, ChartId chart, int order) const override {
    const JetLayout& L = JetLayout::get(dim(), order);
    std::array<Jet, JetLayout::kMaxVars> xs;
    for (int i = 0; i < dim(); ++i) xs[i] = Jet::variable(L, i, x[i]);
    return compose_impl(t, std::span<const Jet>(xs.data(), dim()), chart);
  }
  TensorJet compose_impl(double, std::span<const Jet> x, ChartId) const override {
    TensorJet out(valence(), dim());
    const std::span<const double> c(center_.data(), dim());
    for (Eigen::Index f = 0; f < poly_.size(); ++f) {
      out[f] = kiw::compose(poly_[f], c, x);
      if (!x.empty() && !x[0].is_constant() && out[f].is_constant())
        out[f] = Jet(*x[0].layout(), out[f].value());
    }
    return out;
  }

 private:
  TensorJet poly_;
  Vec center_;
  std::string name_;
};

}  // namespace

TimeProfile TimeProfile::constant(double c) {
  return {fmt_num(c), [c](double) { return c; }, true};
}

TimeProfile TimeProfile::linear(double c0, double c1) {
  return {fmt_num(c0) + "+" + fmt_num(c1) + "*t", [c0, c1](double t) { return c0 + c1 * t; },
          true};
}

TimeProfile TimeProfile::cosine(double amplitude, double omega) {
  return {fmt_num(amplitude) + "*cos(" + fmt_num(omega) + "*t)",
          [amplitude, omega](double t) { return amplitude * std::cos(omega * t); }, true};
}

TimeProfile TimeProfile::exponential(double rate) {
  return {"exp(" + fmt_num(rate) + "*t)", [rate](double t) { return std::exp(rate * t); }, true};
}

TimeProfile TimeProfile::step(double at) {
  return {"step(" + fmt_num(at) + ")", [at](double t) { return t < at ? 0.0 : 1.0; }, false};
}

void TensorField::require_order(int order) const {
  if (order > smoothness_)
    throw InsufficientSmoothness(describe() + " is declared C^" + std::to_string(smoothness_) +
                                 " but derivatives of order " + std::to_string(order) +
                                 " were requested");
}

TensorJet TensorField::jet(double t, const Vec& x, ChartId chart, int order) const {
  require_order(order);
  return jet_impl(t, x, chart, order);
}

TensorValue TensorField::partial(double t, const Vec& x, ChartId chart,
                                 const MultiIndex& alpha) const {
  return partial_of(jet(t, x, chart, alpha[0] + alpha[1] + alpha[2]), alpha);
}

TensorJet TensorField::compose(double t, std::span<const Jet> x, ChartId chart) const {
  int order = 0;
  for (const Jet& xi : x) order = std::max(order, xi.order());
  require_order(order);
  return compose_impl(t, x, chart);
}

bool TensorField::separable(std::vector<SeparablePart>*) const { return false; }

TensorValue TensorField::eval_impl(double t, const Vec& x, ChartId chart) const {
  return values_of(jet_impl(t, x, chart, 0));
}

TensorJet TensorField::compose_impl(double t, std::span<const Jet> x, ChartId chart) const {
  int order = 0;
  for (const Jet& xi : x) order = std::max(order, xi.order());
  Vec y(dim_);
  for (int i = 0; i < dim_; ++i) y[i] = x[i].value();
  const TensorJet J = jet_impl(t, y, chart, order);
  TensorJet out(valence_, dim_);
  for (Eigen::Index f = 0; f < J.size(); ++f)
    out[f] = kiw::compose(J[f], std::span<const double>(y.data(), dim_), x);
  return out;
}

FieldPtr lie_derivative(FieldPtr K, FieldPtr X, int out_order) {
  if (!(X->valence() == Valence{1, 0}) || X->dim() != K->dim())
    throw ShapeMismatch("Lie derivative needs a vector field of matching dimension");
  if (K->smoothness() < out_order + 1 || X->smoothness() < out_order + 1)
    throw InsufficientSmoothness("L_X K of order " + std::to_string(out_order) +
                                 " needs K and X of class C^" + std::to_string(out_order + 1) +
                                 " (have C^" + std::to_string(K->smoothness()) + ", C^" +
                                 std::to_string(X->smoothness()) + ")");
  return std::make_shared<LieDerivativeField>(std::move(K), std::move(X), out_order);
}

FieldPtr taylor_field(const TensorJet& poly, const Vec& center, std::string name) {
  return std::make_shared<TaylorField>(poly, center, std::move(name));
}

TensorValue lie_derivative_value(const TensorField& K, const TensorField& X, double t,
                                 const Vec& x, ChartId chart) {
  return values_of(lie_derivative_jet(K.jet(t, x, chart, 1), X.jet(t, x, chart, 1), 0));
}

TensorValue lie_derivative_fd_oracle(const TensorField& K, const TensorField& X, double t,
                                     const Vec& x, ChartId chart, double eps) {
  const int n = X.dim();
  auto rhs = [&](const Vec& z, const Mat& M, Vec& dz, Mat& dM) {
    const TensorJet j = X.jet(t, z, chart, 1);
    dz = values_of(j).components();
    dM = jacobian_of(j) * M;
  };
  auto flow = [&](double span) {
    constexpr int kSub = 8;
    const double h = span / kSub;
    Vec z = x;
    Mat M = Mat::Identity(n, n);
    Vec k1, k2, k3, k4;
    Mat m1, m2, m3, m4;
    for (int s = 0; s < kSub; ++s) {
      rhs(z, M, k1, m1);
      rhs(z + 0.5 * h * k1, M + 0.5 * h * m1, k2, m2);
      rhs(z + 0.5 * h * k2, M + 0.5 * h * m2, k3, m3);
      rhs(z + h * k3, M + h * m3, k4, m4);
      z += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      M += h / 6.0 * (m1 + 2.0 * m2 + 2.0 * m3 + m4);
    }
    return pullback(K.eval(t, z, chart), M, M.inverse());
  };
  TensorValue d = flow(eps) - flow(-eps);
  d *= 1.0 / (2.0 * eps);
  return d;
}

}  // namespace kiw
