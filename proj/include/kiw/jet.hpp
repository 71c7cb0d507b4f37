#pragma once

#include <Eigen/Core>

#include <array>
#include <cmath>
#include <span>
#include <vector>

namespace kiw {

using MultiIndex = std::array<int, 3>;

// Monomial bookkeeping for truncated Taylor polynomials in up to three
// variables. Monomials are ordered by total degree, so the layout of a lower
// order is a prefix of the layout of a higher one.
class JetLayout {
 public:
  static constexpr int kMaxVars = 3;
  static constexpr int kMaxOrder = 4;
  static constexpr int kMaxCoeffs = 35;

  struct Product {
    int lhs;
    int rhs;
    int out;
  };

  static const JetLayout& get(int vars, int order);

  int vars() const { return vars_; }
  int order() const { return order_; }
  int size() const { return static_cast<int>(monomials_.size()); }

  const MultiIndex& monomial(int k) const { return monomials_[k]; }
  int degree(int k) const { return degree_[k]; }
  // Index of a monomial, or -1 when its degree exceeds the order.
  int find(const MultiIndex& alpha) const;
  // alpha! for the monomial at index k.
  double factorial(int k) const { return factorial_[k]; }

  std::span<const Product> products() const { return products_; }
  // For each monomial beta of the order-1 layout, index of beta + e_var here.
  std::span<const int> raised(int var) const { return raised_[var]; }

 private:
  JetLayout(int vars, int order);

  int vars_;
  int order_;
  std::vector<MultiIndex> monomials_;
  std::vector<int> degree_;
  std::vector<double> factorial_;
  std::vector<int> lookup_;
  std::vector<Product> products_;
  std::array<std::vector<int>, kMaxVars> raised_;
};

// Truncated multivariate Taylor polynomial: c_alpha = d^alpha f / alpha!.
// A jet without a layout is a plain constant and combines with any layout.
class Jet {
 public:
  using Coeffs = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor,
                               JetLayout::kMaxCoeffs, 1>;

  Jet() : layout_(nullptr), c_(Coeffs::Zero(1)) {}
  Jet(double value) : layout_(nullptr), c_(Coeffs::Constant(1, value)) {}
  Jet(const JetLayout& layout, double value);
  Jet(const JetLayout& layout, const Coeffs& coeffs);

  static Jet variable(const JetLayout& layout, int var, double value);

  const JetLayout* layout() const { return layout_; }
  bool is_constant() const { return layout_ == nullptr; }
  int order() const { return layout_ ? layout_->order() : 0; }
  double value() const { return c_[0]; }
  const Coeffs& coeffs() const { return c_; }
  Coeffs& coeffs() { return c_; }

  // Taylor coefficient of the monomial alpha (zero beyond the order).
  double coeff(const MultiIndex& alpha) const;
  // Spatial partial derivative d^alpha f at the expansion point.
  double partial(const MultiIndex& alpha) const;
  // d/dx_var, one order lower.
  Jet derivative(int var) const;
  Jet truncated(int order) const;

  Jet& operator+=(const Jet& o);
  Jet& operator-=(const Jet& o);
  Jet& operator*=(const Jet& o);
  Jet& operator/=(const Jet& o);
  Jet& operator+=(double v) { c_[0] += v; return *this; }
  Jet& operator-=(double v) { c_[0] -= v; return *this; }
  Jet& operator*=(double v) { c_ *= v; return *this; }
  Jet& operator/=(double v) { c_ /= v; return *this; }

  Jet operator-() const { Jet r(*this); r.c_ = -r.c_; return r; }

 private:
  friend Jet operator*(const Jet& a, const Jet& b);
  void promote(const JetLayout& layout);

  const JetLayout* layout_;
  Coeffs c_;
};

inline Jet operator+(Jet a, const Jet& b) { return a += b; }
inline Jet operator-(Jet a, const Jet& b) { return a -= b; }
Jet operator*(const Jet& a, const Jet& b);
inline Jet operator/(Jet a, const Jet& b) { return a /= b; }
inline Jet operator+(Jet a, double b) { return a += b; }
inline Jet operator+(double a, Jet b) { return b += a; }
inline Jet operator-(Jet a, double b) { return a -= b; }
inline Jet operator-(double a, const Jet& b) { Jet r = -b; return r += a; }
inline Jet operator*(Jet a, double b) { return a *= b; }
inline Jet operator*(double a, Jet b) { return b *= a; }
inline Jet operator/(Jet a, double b) { return a /= b; }
Jet operator/(double a, const Jet& b);

Jet reciprocal(const Jet& x);
Jet sin(const Jet& x);
Jet cos(const Jet& x);
Jet exp(const Jet& x);
Jet log(const Jet& x);
Jet sqrt(const Jet& x);
Jet pow(const Jet& x, int p);
Jet pow(const Jet& x, double p);

// sum_alpha c_alpha prod_i (args_i - center_i)^alpha_i for a Taylor polynomial
// expanded around center. The arguments must share one layout.
Jet compose(const Jet& poly, std::span<const double> center,
            std::span<const Jet> args);

// Value type helpers shared by double and Jet code paths.
inline double value_of(double x) { return x; }
inline double value_of(const Jet& x) { return x.value(); }

}  // namespace kiw

namespace Eigen {

template <>
struct NumTraits<kiw::Jet> : NumTraits<double> {
  using Real = kiw::Jet;
  using NonInteger = kiw::Jet;
  using Nested = kiw::Jet;
  using Literal = kiw::Jet;
  enum {
    IsComplex = 0,
    IsInteger = 0,
    IsSigned = 1,
    RequireInitialization = 1,
    ReadCost = 8,
    AddCost = 16,
    MulCost = 64
  };
};

}  // namespace Eigen
