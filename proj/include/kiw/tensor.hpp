#pragma once

#include <Eigen/Core>

#include <span>
#include <string>

#include "kiw/errors.hpp"
#include "kiw/jet.hpp"

namespace kiw {

struct Valence {
  int contra = 0;
  int co = 0;

  int rank() const { return contra + co; }
  Valence transposed() const { return {co, contra}; }
  bool operator==(const Valence&) const = default;
  std::string str() const;
};

inline int ipow(int base, int exp) {
  int r = 1;
  while (exp-- > 0) r *= base;
  return r;
}

// Dense components of an (r,s)-tensor at a point, row-major over the
// multi-index (contravariant..., covariant...).
template <typename Scalar>
class BasicTensor {
 public:
  using Storage = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  BasicTensor() = default;
  BasicTensor(Valence valence, int dim)
      : valence_(valence), dim_(dim), c_(Storage::Constant(ipow(dim, valence.rank()), Scalar(0.0))) {}
  BasicTensor(Valence valence, int dim, Storage components)
      : valence_(valence), dim_(dim), c_(std::move(components)) {
    if (c_.size() != ipow(dim, valence.rank()))
      throw ShapeMismatch("expected " + std::to_string(ipow(dim, valence.rank())) +
                          " components for valence " + valence.str());
  }

  Valence valence() const { return valence_; }
  int dim() const { return dim_; }
  Eigen::Index size() const { return c_.size(); }

  Scalar& operator[](Eigen::Index i) { return c_[i]; }
  const Scalar& operator[](Eigen::Index i) const { return c_[i]; }
  Storage& components() { return c_; }
  const Storage& components() const { return c_; }

  // Flat offset of a full multi-index (0-based).
  Eigen::Index offset(std::span<const int> index) const {
    Eigen::Index f = 0;
    for (int i : index) f = f * dim_ + i;
    return f;
  }
  Scalar& at(std::initializer_list<int> index) {
    return c_[offset(std::span<const int>(index.begin(), index.size()))];
  }
  const Scalar& at(std::initializer_list<int> index) const {
    return c_[offset(std::span<const int>(index.begin(), index.size()))];
  }

  BasicTensor& operator+=(const BasicTensor& o) {
    check_same(o);
    for (Eigen::Index i = 0; i < c_.size(); ++i) c_[i] += o.c_[i];
    return *this;
  }
  BasicTensor& operator-=(const BasicTensor& o) {
    check_same(o);
    for (Eigen::Index i = 0; i < c_.size(); ++i) c_[i] -= o.c_[i];
    return *this;
  }
  template <typename T>
  BasicTensor& operator*=(const T& s) {
    for (Eigen::Index i = 0; i < c_.size(); ++i) c_[i] *= s;
    return *this;
  }

 private:
  void check_same(const BasicTensor& o) const {
    if (!(valence_ == o.valence_) || dim_ != o.dim_)
      throw ShapeMismatch("tensor arithmetic between " + valence_.str() + " and " +
                          o.valence_.str());
  }

  Valence valence_;
  int dim_ = 0;
  Storage c_;
};

template <typename Scalar>
BasicTensor<Scalar> operator+(BasicTensor<Scalar> a, const BasicTensor<Scalar>& b) {
  return a += b;
}
template <typename Scalar>
BasicTensor<Scalar> operator-(BasicTensor<Scalar> a, const BasicTensor<Scalar>& b) {
  return a -= b;
}
template <typename Scalar, typename T>
BasicTensor<Scalar> operator*(BasicTensor<Scalar> a, const T& s) {
  return a *= s;
}

using TensorValue = BasicTensor<double>;
using TensorJet = BasicTensor<Jet>;
using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

// Jacobian data of a diffeomorphism at a point: jac = Dphi(x),
// inv_jac = Dpsi(phi(x)) with psi the inverse map.
struct JacobianData {
  Mat jac;
  Mat inv_jac;
  Vec base;
  Vec image;
};

// Contract contravariant slots with `contra` (new^i = contra(i,p) old^p) and
// covariant slots with `co` (new_j = old_q co(q,j)). Called as
// transform_tensor(v, jac, inv_jac) this is the chart-change rule.
template <typename Scalar, typename Matrix>
BasicTensor<Scalar> transform_tensor(const BasicTensor<Scalar>& value, const Matrix& contra,
                                     const Matrix& co) {
  const int n = value.dim();
  const Valence v = value.valence();
  if (v.rank() == 0) return value;
  if (contra.rows() != n || contra.cols() != n || co.rows() != n || co.cols() != n)
    throw ShapeMismatch("transform matrices must be " + std::to_string(n) + "x" +
                        std::to_string(n));
  BasicTensor<Scalar> cur = value;
  BasicTensor<Scalar> next(v, n);
  const Eigen::Index total = value.size();
  for (int slot = 0; slot < v.rank(); ++slot) {
    const Eigen::Index stride = ipow(n, v.rank() - 1 - slot);
    const bool contravariant = slot < v.contra;
    for (Eigen::Index f = 0; f < total; ++f) {
      const int d = static_cast<int>((f / stride) % n);
      const Eigen::Index base = f - d * stride;
      Scalar acc(0.0);
      for (int p = 0; p < n; ++p) {
        const auto& m = contravariant ? contra(d, p) : co(p, d);
        acc += m * cur[base + p * stride];
      }
      next[f] = acc;
    }
    std::swap(cur, next);
  }
  return cur;
}

TensorValue pullback(const TensorValue& value_at_image, const JacobianData& J);
TensorValue pushforward(const TensorValue& value_at_base, const JacobianData& J);
TensorValue pullback(const TensorValue& value_at_image, const Mat& jac, const Mat& inv_jac);
TensorValue pushforward(const TensorValue& value_at_base, const Mat& jac, const Mat& inv_jac);

// Full contraction of an (r,s) tensor with an (s,r) tensor.
double pair(const TensorValue& K, const TensorValue& S);

double max_abs(const TensorValue& v);

TensorValue values_of(const TensorJet& j);
TensorJet truncated(const TensorJet& j, int order);
// Component-wise spatial partial derivative.
TensorValue partial_of(const TensorJet& j, const MultiIndex& alpha);

// Lie derivative on Taylor jets. K and X must carry order+1; the result has
// the given order.
TensorJet lie_derivative_jet(const TensorJet& K, const TensorJet& X, int order);

}  // namespace kiw
