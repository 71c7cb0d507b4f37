#include "kiw/tensor.hpp"

#include <cmath>
#include <vector>

namespace kiw {

std::string Valence::str() const {
  return "(" + std::to_string(contra) + "," + std::to_string(co) + ")";
}

TensorValue pullback(const TensorValue& value_at_image, const Mat& jac, const Mat& inv_jac) {
  return transform_tensor(value_at_image, inv_jac, jac);
}

TensorValue pushforward(const TensorValue& value_at_base, const Mat& jac, const Mat& inv_jac) {
  return transform_tensor(value_at_base, jac, inv_jac);
}

TensorValue pullback(const TensorValue& value_at_image, const JacobianData& J) {
  return pullback(value_at_image, J.jac, J.inv_jac);
}

TensorValue pushforward(const TensorValue& value_at_base, const JacobianData& J) {
  return pushforward(value_at_base, J.jac, J.inv_jac);
}

double pair(const TensorValue& K, const TensorValue& S) {
  const Valence v = K.valence();
  if (!(S.valence() == v.transposed()) || K.dim() != S.dim())
    throw ValenceMismatch("cannot pair " + v.str() + " with " + S.valence().str());
  const int n = K.dim();
  const Eigen::Index low = ipow(n, v.co);
  const Eigen::Index high = ipow(n, v.contra);
  double acc = 0.0;
  for (Eigen::Index f = 0; f < K.size(); ++f) {
    const Eigen::Index p = f / low;
    const Eigen::Index q = f % low;
    acc += K[f] * S[q * high + p];
  }
  return acc;
}

double max_abs(const TensorValue& v) {
  return v.size() == 0 ? 0.0 : v.components().cwiseAbs().maxCoeff();
}

TensorValue values_of(const TensorJet& j) {
  TensorValue r(j.valence(), j.dim());
  for (Eigen::Index f = 0; f < j.size(); ++f) r[f] = j[f].value();
  return r;
}

TensorJet truncated(const TensorJet& j, int order) {
  TensorJet r = j;
  for (Eigen::Index f = 0; f < j.size(); ++f) r[f] = j[f].truncated(order);
  return r;
}

TensorValue partial_of(const TensorJet& j, const MultiIndex& alpha) {
  TensorValue r(j.valence(), j.dim());
  for (Eigen::Index f = 0; f < j.size(); ++f) r[f] = j[f].partial(alpha);
  return r;
}

TensorJet lie_derivative_jet(const TensorJet& K, const TensorJet& X, int order) {
  const int n = K.dim();
  if (!(X.valence() == Valence{1, 0}) || X.dim() != n)
    throw ShapeMismatch("Lie derivative needs a vector field of dimension " + std::to_string(n));
  const Valence v = K.valence();
  const int rank = v.rank();
  const Eigen::Index total = K.size();

  std::vector<TensorJet> dK(n, TensorJet(v, n));
  for (int l = 0; l < n; ++l)
    for (Eigen::Index f = 0; f < total; ++f) dK[l][f] = K[f].derivative(l).truncated(order);
  const TensorJet Kt = truncated(K, order);
  std::vector<Jet> Xt(n);
  std::vector<Jet> dX(n * n);  // dX[l * n + i] = d_l X^i
  for (int i = 0; i < n; ++i) {
    Xt[i] = X[i].truncated(order);
    for (int l = 0; l < n; ++l) dX[l * n + i] = X[i].derivative(l).truncated(order);
  }

  TensorJet out(v, n);
  for (Eigen::Index f = 0; f < total; ++f) {
    Jet acc(0.0);
    for (int l = 0; l < n; ++l) acc += Xt[l] * dK[l][f];
    for (int slot = 0; slot < rank; ++slot) {
      const Eigen::Index stride = ipow(n, rank - 1 - slot);
      const int d = static_cast<int>((f / stride) % n);
      const Eigen::Index base = f - d * stride;
      if (slot < v.contra) {
        for (int l = 0; l < n; ++l) acc -= Kt[base + l * stride] * dX[l * n + d];
      } else {
        for (int l = 0; l < n; ++l) acc += Kt[base + l * stride] * dX[d * n + l];
      }
    }
    out[f] = acc;
  }
  return out;
}

}  // namespace kiw
