#include "kiw/jet.hpp"

#include <cassert>
#include <memory>
#include <mutex>

#include "kiw/errors.hpp"

namespace kiw {

namespace {

using Coeffs = Jet::Coeffs;

// Horner evaluation of sum_k d[k] (x - x0)^k.
Jet univariate(const Jet& x, std::span<const double> d) {
  if (x.is_constant()) return Jet(d[0]);
  Jet h = x;
  h.coeffs()[0] = 0.0;
  const int order = x.order();
  Jet r(*x.layout(), d[order]);
  for (int k = order - 1; k >= 0; --k) {
    r = r * h;
    r.coeffs()[0] += d[k];
  }
  return r;
}

}  // namespace

JetLayout::JetLayout(int vars, int order) : vars_(vars), order_(order) {
  const int base = order + 1;
  lookup_.assign(base * base * base, -1);
  for (int deg = 0; deg <= order; ++deg) {
    for (int a0 = deg; a0 >= 0; --a0) {
      if (vars == 1 && a0 != deg) continue;
      for (int a1 = deg - a0; a1 >= 0; --a1) {
        const int a2 = deg - a0 - a1;
        if (vars < 3 && a2 != 0) continue;
        if (vars < 2 && a1 != 0) continue;
        lookup_[a0 + base * (a1 + base * a2)] = size();
        monomials_.push_back({a0, a1, a2});
        degree_.push_back(deg);
        double f = 1.0;
        for (int a : {a0, a1, a2})
          for (int m = 2; m <= a; ++m) f *= m;
        factorial_.push_back(f);
      }
    }
  }
  for (int i = 0; i < size(); ++i) {
    for (int j = 0; j < size(); ++j) {
      if (degree_[i] + degree_[j] > order) continue;
      const MultiIndex& a = monomials_[i];
      const MultiIndex& b = monomials_[j];
      products_.push_back({i, j, find({a[0] + b[0], a[1] + b[1], a[2] + b[2]})});
    }
  }
  if (order > 0) {
    for (int v = 0; v < vars; ++v) {
      for (int k = 0; k < size(); ++k) {
        if (degree_[k] >= order) break;
        MultiIndex a = monomials_[k];
        ++a[v];
        raised_[v].push_back(find(a));
      }
    }
  }
}

int JetLayout::find(const MultiIndex& alpha) const {
  if (alpha[0] < 0 || alpha[1] < 0 || alpha[2] < 0) return -1;
  if (alpha[0] + alpha[1] + alpha[2] > order_) return -1;
  const int base = order_ + 1;
  return lookup_[alpha[0] + base * (alpha[1] + base * alpha[2])];
}

const JetLayout& JetLayout::get(int vars, int order) {
  if (vars < 1 || vars > kMaxVars || order < 0 || order > kMaxOrder)
    throw InsufficientSmoothness("jet layout (" + std::to_string(vars) + " vars, order " +
                                 std::to_string(order) + ") is not supported");
  static std::once_flag once;
  static std::array<std::unique_ptr<JetLayout>, kMaxVars*(kMaxOrder + 1)> table;
  std::call_once(once, [] {
    for (int n = 1; n <= kMaxVars; ++n)
      for (int d = 0; d <= kMaxOrder; ++d)
        table[(n - 1) * (kMaxOrder + 1) + d].reset(new JetLayout(n, d));
  });
  return *table[(vars - 1) * (kMaxOrder + 1) + order];
}

Jet::Jet(const JetLayout& layout, double value)
    : layout_(&layout), c_(Coeffs::Zero(layout.size())) {
  c_[0] = value;
}

Jet::Jet(const JetLayout& layout, const Coeffs& coeffs) : layout_(&layout), c_(coeffs) {
  assert(coeffs.size() == layout.size());
}

Jet Jet::variable(const JetLayout& layout, int var, double value) {
  Jet r(layout, value);
  if (layout.order() > 0) {
    MultiIndex e{0, 0, 0};
    e[var] = 1;
    r.c_[layout.find(e)] = 1.0;
  }
  return r;
}

double Jet::coeff(const MultiIndex& alpha) const {
  if (!layout_) return (alpha[0] | alpha[1] | alpha[2]) == 0 ? c_[0] : 0.0;
  const int k = layout_->find(alpha);
  return k < 0 ? 0.0 : c_[k];
}

double Jet::partial(const MultiIndex& alpha) const {
  if (!layout_) return (alpha[0] | alpha[1] | alpha[2]) == 0 ? c_[0] : 0.0;
  const int k = layout_->find(alpha);
  return k < 0 ? 0.0 : c_[k] * layout_->factorial(k);
}

Jet Jet::derivative(int var) const {
  if (!layout_ || layout_->order() == 0) return Jet(0.0);
  const JetLayout& lower = JetLayout::get(layout_->vars(), layout_->order() - 1);
  Jet r(lower, 0.0);
  const auto raised = layout_->raised(var);
  for (int k = 0; k < lower.size(); ++k)
    r.c_[k] = (lower.monomial(k)[var] + 1) * c_[raised[k]];
  return r;
}

Jet Jet::truncated(int order) const {
  if (!layout_ || order >= layout_->order()) return *this;
  const JetLayout& lower = JetLayout::get(layout_->vars(), order);
  return Jet(lower, Coeffs(c_.head(lower.size())));
}

void Jet::promote(const JetLayout& layout) {
  const double v = c_[0];
  c_ = Coeffs::Zero(layout.size());
  c_[0] = v;
  layout_ = &layout;
}

Jet& Jet::operator+=(const Jet& o) {
  if (!o.layout_) {
    c_[0] += o.c_[0];
  } else if (!layout_) {
    const double v = c_[0];
    *this = o;
    c_[0] += v;
  } else if (layout_ == o.layout_) {
    c_ += o.c_;
  } else if (layout_->order() <= o.layout_->order()) {
    c_ += o.c_.head(c_.size());
  } else {
    *this = truncated(o.layout_->order());
    c_ += o.c_;
  }
  return *this;
}

Jet& Jet::operator-=(const Jet& o) {
  if (!o.layout_) {
    c_[0] -= o.c_[0];
  } else if (!layout_) {
    const double v = c_[0];
    *this = -o;
    c_[0] += v;
  } else if (layout_ == o.layout_) {
    c_ -= o.c_;
  } else if (layout_->order() <= o.layout_->order()) {
    c_ -= o.c_.head(c_.size());
  } else {
    *this = truncated(o.layout_->order());
    c_ -= o.c_;
  }
  return *this;
}

Jet operator*(const Jet& a, const Jet& b) {
  if (!a.layout_) return b * a.c_[0];
  if (!b.layout_) return a * b.c_[0];
  const JetLayout& L = a.layout_->order() <= b.layout_->order() ? *a.layout_ : *b.layout_;
  Jet r(L, 0.0);
  double* out = r.c_.data();
  const double* x = a.c_.data();
  const double* y = b.c_.data();
  for (const auto& p : L.products()) out[p.out] += x[p.lhs] * y[p.rhs];
  return r;
}

Jet& Jet::operator*=(const Jet& o) { return *this = *this * o; }
Jet& Jet::operator/=(const Jet& o) { return *this = *this * reciprocal(o); }

Jet operator/(double a, const Jet& b) { return reciprocal(b) * a; }

Jet reciprocal(const Jet& x) {
  std::array<double, JetLayout::kMaxOrder + 1> d{};
  const double inv = 1.0 / x.value();
  double p = inv;
  for (int k = 0; k <= x.order(); ++k) {
    d[k] = (k % 2 == 0) ? p : -p;
    p *= inv;
  }
  return univariate(x, d);
}

Jet sin(const Jet& x) {
  std::array<double, JetLayout::kMaxOrder + 1> d{};
  const double s = std::sin(x.value()), c = std::cos(x.value());
  double f = 1.0;
  for (int k = 0; k <= x.order(); ++k) {
    if (k > 0) f *= k;
    const double v[4] = {s, c, -s, -c};
    d[k] = v[k % 4] / f;
  }
  return univariate(x, d);
}

Jet cos(const Jet& x) {
  std::array<double, JetLayout::kMaxOrder + 1> d{};
  const double s = std::sin(x.value()), c = std::cos(x.value());
  double f = 1.0;
  for (int k = 0; k <= x.order(); ++k) {
    if (k > 0) f *= k;
    const double v[4] = {c, -s, -c, s};
    d[k] = v[k % 4] / f;
  }
  return univariate(x, d);
}

Jet exp(const Jet& x) {
  std::array<double, JetLayout::kMaxOrder + 1> d{};
  const double e = std::exp(x.value());
  double f = 1.0;
  for (int k = 0; k <= x.order(); ++k) {
    if (k > 0) f *= k;
    d[k] = e / f;
  }
  return univariate(x, d);
}

Jet log(const Jet& x) {
  std::array<double, JetLayout::kMaxOrder + 1> d{};
  const double a = x.value();
  d[0] = std::log(a);
  double p = 1.0;
  for (int k = 1; k <= x.order(); ++k) {
    p *= a;
    d[k] = ((k % 2 == 1) ? 1.0 : -1.0) / (k * p);
  }
  return univariate(x, d);
}

Jet pow(const Jet& x, double p) {
  std::array<double, JetLayout::kMaxOrder + 1> d{};
  const double a = x.value();
  double binom = 1.0;
  for (int k = 0; k <= x.order(); ++k) {
    d[k] = binom * std::pow(a, p - k);
    binom *= (p - k) / (k + 1);
  }
  return univariate(x, d);
}

Jet sqrt(const Jet& x) { return pow(x, 0.5); }

Jet pow(const Jet& x, int p) {
  if (p < 0) return reciprocal(pow(x, -p));
  Jet r(1.0);
  for (int k = 0; k < p; ++k) r = r * x;
  return r;
}

Jet compose(const Jet& poly, std::span<const double> center, std::span<const Jet> args) {
  if (poly.is_constant()) return poly;
  const JetLayout& L = *poly.layout();
  const int n = L.vars();
  std::array<std::array<Jet, JetLayout::kMaxOrder + 1>, JetLayout::kMaxVars> powers;
  for (int i = 0; i < n; ++i) {
    const Jet h = args[i] - center[i];
    powers[i][0] = Jet(1.0);
    for (int m = 1; m <= L.order(); ++m) powers[i][m] = powers[i][m - 1] * h;
  }
  Jet r(poly.value());
  for (int k = 1; k < L.size(); ++k) {
    const double c = poly.coeffs()[k];
    if (c == 0.0) continue;
    const MultiIndex& a = L.monomial(k);
    Jet term = powers[0][a[0]];
    for (int i = 1; i < n; ++i)
      if (a[i] > 0) term = term * powers[i][a[i]];
    r += term * c;
  }
  return r;
}

}  // namespace kiw
