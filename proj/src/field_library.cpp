#include "kiw/field_library.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>
#include <type_traits>

namespace kiw {

namespace {

template <typename T>
using scalar_of = std::remove_cvref_t<T>;

std::string num(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

TimeProfile product(const TimeProfile& a, const TimeProfile& b) {
  if (a.name == "1") return b;
  if (b.name == "1") return a;
  auto fa = a.value;
  auto fb = b.value;
  return {a.name + "*" + b.name, [fa, fb](double t) { return fa(t) * fb(t); }, a.c1 && b.c1};
}

class GradientForm final : public TensorField {
 public:
  explicit GradientForm(FieldPtr f)
      : TensorField({0, 1}, f->dim(), f->smoothness() - 1, f->time_c1()), f_(std::move(f)) {}
  std::string describe() const override { return "d(" + f_->describe() + ")"; }
  bool separable(std::vector<SeparablePart>* parts) const override {
    std::vector<SeparablePart> inner;
    if (!f_->separable(&inner)) return false;
    if (parts)
      for (auto& p : inner) parts->push_back({p.profile, std::make_shared<GradientForm>(p.spatial)});
    return true;
  }

 protected:
  TensorJet jet_impl(double t, const Vec& x, ChartId chart, int order) const override {
    const TensorJet g = f_->jet(t, x, chart, order + 1);
    TensorJet out({0, 1}, dim());
    for (int j = 0; j < dim(); ++j) out[j] = g[0].derivative(j);
    return out;
  }

 private:
  FieldPtr f_;
};

class TensorProduct final : public TensorField {
 public:
  TensorProduct(FieldPtr a, FieldPtr b)
      : TensorField({a->valence().contra + b->valence().contra, a->valence().co + b->valence().co},
                    a->dim(), std::min(a->smoothness(), b->smoothness()),
                    a->time_c1() && b->time_c1()),
        a_(std::move(a)),
        b_(std::move(b)) {
    const int n = dim();
    const Valence va = a_->valence(), vb = b_->valence();
    const int nsa = ipow(n, va.co), nsb = ipow(n, vb.co), nrb = ipow(n, vb.contra);
    const int total = ipow(n, valence().rank());
    for (int f = 0; f < total; ++f) {
      int g = f;
      const int jb = g % nsb;
      g /= nsb;
      const int ja = g % nsa;
      g /= nsa;
      const int ib = g % nrb;
      const int ia = g / nrb;
      index_.push_back({ia * nsa + ja, ib * nsb + jb});
    }
  }
  std::string describe() const override {
    return "(" + a_->describe() + ")x(" + b_->describe() + ")";
  }
  bool separable(std::vector<SeparablePart>* parts) const override {
    std::vector<SeparablePart> pa, pb;
    if (!a_->separable(&pa) || !b_->separable(&pb)) return false;
    if (parts)
      for (const auto& x : pa)
        for (const auto& y : pb)
          parts->push_back(
              {product(x.profile, y.profile), std::make_shared<TensorProduct>(x.spatial, y.spatial)});
    return true;
  }

 protected:
  TensorJet jet_impl(double t, const Vec& x, ChartId chart, int order) const override {
    return combine(a_->jet(t, x, chart, order), b_->jet(t, x, chart, order));
  }
  TensorValue eval_impl(double t, const Vec& x, ChartId chart) const override {
    return combine(a_->eval(t, x, chart), b_->eval(t, x, chart));
  }
  TensorJet compose_impl(double t, std::span<const Jet> x, ChartId chart) const override {
    return combine(a_->compose(t, x, chart), b_->compose(t, x, chart));
  }

 private:
  template <typename S>
  BasicTensor<S> combine(const BasicTensor<S>& A, const BasicTensor<S>& B) const {
    BasicTensor<S> out(valence(), dim());
    for (std::size_t f = 0; f < index_.size(); ++f)
      out[f] = A[index_[f].first] * B[index_[f].second];
    return out;
  }

  FieldPtr a_;
  FieldPtr b_;
  std::vector<std::pair<int, int>> index_;
};

class LinearCombination final : public TensorField {
 public:
  LinearCombination(std::vector<FieldPtr> fields, std::vector<double> weights, int smoothness,
                    bool time_c1)
      : TensorField(fields.at(0)->valence(), fields.at(0)->dim(), smoothness, time_c1),
        fields_(std::move(fields)),
        weights_(std::move(weights)) {}
  std::string describe() const override {
    std::string s;
    for (std::size_t m = 0; m < fields_.size(); ++m)
      s += (m ? " + " : "") + num(weights_[m]) + "*" + fields_[m]->describe();
    return s;
  }
  bool separable(std::vector<SeparablePart>* parts) const override {
    std::vector<SeparablePart> all;
    for (std::size_t m = 0; m < fields_.size(); ++m) {
      std::vector<SeparablePart> inner;
      if (!fields_[m]->separable(&inner)) return false;
      for (auto& p : inner) {
        if (weights_[m] != 1.0)
          p.profile = product(TimeProfile::constant(weights_[m]), p.profile);
        all.push_back(std::move(p));
      }
    }
    if (parts) parts->insert(parts->end(), all.begin(), all.end());
    return true;
  }

 protected:
  TensorJet jet_impl(double t, const Vec& x, ChartId chart, int order) const override {
    TensorJet out = fields_[0]->jet(t, x, chart, order) * weights_[0];
    for (std::size_t m = 1; m < fields_.size(); ++m)
      out += fields_[m]->jet(t, x, chart, order) * weights_[m];
    return out;
  }
  TensorValue eval_impl(double t, const Vec& x, ChartId chart) const override {
    TensorValue out = fields_[0]->eval(t, x, chart) * weights_[0];
    for (std::size_t m = 1; m < fields_.size(); ++m)
      out += fields_[m]->eval(t, x, chart) * weights_[m];
    return out;
  }
  TensorJet compose_impl(double t, std::span<const Jet> x, ChartId chart) const override {
    TensorJet out = fields_[0]->compose(t, x, chart) * weights_[0];
    for (std::size_t m = 1; m < fields_.size(); ++m)
      out += fields_[m]->compose(t, x, chart) * weights_[m];
    return out;
  }

 private:
  std::vector<FieldPtr> fields_;
  std::vector<double> weights_;
};

class TimeModulated final : public TensorField {
 public:
  TimeModulated(FieldPtr f, TimeProfile p)
      : TensorField(f->valence(), f->dim(), f->smoothness(), f->time_c1() && p.c1),
        f_(std::move(f)),
        p_(std::move(p)) {}
  std::string describe() const override { return p_.name + "*" + f_->describe(); }
  bool separable(std::vector<SeparablePart>* parts) const override {
    std::vector<SeparablePart> inner;
    if (!f_->separable(&inner)) return false;
    if (parts)
      for (auto& q : inner) parts->push_back({product(p_, q.profile), q.spatial});
    return true;
  }

 protected:
  TensorJet jet_impl(double t, const Vec& x, ChartId chart, int order) const override {
    return f_->jet(t, x, chart, order) * p_.value(t);
  }
  TensorValue eval_impl(double t, const Vec& x, ChartId chart) const override {
    return f_->eval(t, x, chart) * p_.value(t);
  }
  TensorJet compose_impl(double t, std::span<const Jet> x, ChartId chart) const override {
    return f_->compose(t, x, chart) * p_.value(t);
  }

 private:
  FieldPtr f_;
  TimeProfile p_;
};

class DeclaredSmoothness final : public TensorField {
 public:
  DeclaredSmoothness(FieldPtr f, int smoothness)
      : TensorField(f->valence(), f->dim(), std::min(smoothness, f->smoothness()), f->time_c1()),
        f_(std::move(f)) {}
  std::string describe() const override {
    return f_->describe() + " [C^" + std::to_string(smoothness()) + "]";
  }
  bool separable(std::vector<SeparablePart>* parts) const override {
    std::vector<SeparablePart> inner;
    if (!f_->separable(&inner)) return false;
    if (parts)
      for (auto& q : inner)
        parts->push_back({q.profile, std::make_shared<DeclaredSmoothness>(q.spatial, smoothness())});
    return true;
  }

 protected:
  TensorJet jet_impl(double t, const Vec& x, ChartId chart, int order) const override {
    return f_->jet(t, x, chart, order);
  }
  TensorValue eval_impl(double t, const Vec& x, ChartId chart) const override {
    return f_->eval(t, x, chart);
  }
  TensorJet compose_impl(double t, std::span<const Jet> x, ChartId chart) const override {
    return f_->compose(t, x, chart);
  }

 private:
  FieldPtr f_;
};

}  // namespace

FieldPtr zero_field(Valence valence, int dim) {
  return make_formula_field("0", valence, dim, [](double, auto, ChartId, auto out) {
    using S = scalar_of<decltype(out[0])>;
    for (auto& o : out) o = S(0.0);
  });
}

FieldPtr constant_field(Valence valence, int dim, const Vec& components) {
  if (components.size() != ipow(dim, valence.rank()))
    throw ShapeMismatch("constant field needs " + std::to_string(ipow(dim, valence.rank())) +
                        " components");
  return make_formula_field("const", valence, dim, [components](double, auto, ChartId, auto out) {
    using S = scalar_of<decltype(out[0])>;
    for (std::size_t f = 0; f < out.size(); ++f) out[f] = S(components[f]);
  });
}

FieldPtr coordinate_form(int dim, int axis) {
  Vec c = Vec::Zero(dim);
  c[axis] = 1.0;
  return constant_field({0, 1}, dim, c);
}

FieldPtr linear_vector_field(const Mat& A, const Vec& c) {
  const int n = static_cast<int>(A.rows());
  return make_formula_field("linear", {1, 0}, n, [A, c, n](double, auto x, ChartId, auto out) {
    using S = scalar_of<decltype(out[0])>;
    for (int i = 0; i < n; ++i) {
      S acc(c[i]);
      for (int j = 0; j < n; ++j)
        if (A(i, j) != 0.0) acc += A(i, j) * x[j];
      out[i] = acc;
    }
  });
}

FieldPtr rotation_field(double rate) {
  Mat A(2, 2);
  A << 0.0, -rate, rate, 0.0;
  return linear_vector_field(A, Vec::Zero(2));
}

FieldPtr shear_field(double rate) {
  Mat A(2, 2);
  A << 0.0, rate, 0.0, 0.0;
  return linear_vector_field(A, Vec::Zero(2));
}

FieldPtr dilation_field(int dim, double rate) {
  return linear_vector_field(rate * Mat::Identity(dim, dim), Vec::Zero(dim));
}

FieldPtr power_field(double c, int p) {
  return make_formula_field(num(c) + "*x^" + std::to_string(p), {1, 0}, 1,
                            [c, p](double, auto x, ChartId, auto out) {
                              using S = scalar_of<decltype(out[0])>;
                              S v(c);
                              for (int k = 0; k < p; ++k) v = v * x[0];
                              out[0] = v;
                            });
}

FieldPtr periodic_vector_field(int dim, double amp, const Vec& base, const Vec& phase) {
  return make_formula_field("periodic", {1, 0}, dim,
                            [dim, amp, base, phase](double, auto x, ChartId, auto out) {
                              using std::sin;
                              const double w = 2.0 * std::numbers::pi;
                              for (int i = 0; i < dim; ++i)
                                out[i] = base[i] + amp * sin(w * x[(i + 1) % dim] + phase[i]);
                            });
}

FieldPtr sphere_rotation_field(double wx, double wy, double wz) {
  return make_formula_field(
      "sphere_rotation(" + num(wx) + "," + num(wy) + "," + num(wz) + ")", {1, 0}, 2,
      [wx, wy, wz](double, auto x, ChartId chart, auto out) {
        const double sign = chart == 0 ? 1.0 : -1.0;
        const auto x11 = x[0] * x[0];
        const auto x22 = x[1] * x[1];
        const auto x12 = x[0] * x[1];
        out[0] = sign * (wx * x12 + wy * 0.5 * (x22 - x11 - 1.0)) - wz * x[1];
        out[1] = sign * (wx * 0.5 * (1.0 - x11 + x22) - wy * x12) + wz * x[0];
      });
}

FieldPtr polynomial_field(Valence valence, int dim, int degree, const Mat& coeffs) {
  const JetLayout& L = JetLayout::get(dim, degree);
  if (coeffs.rows() != ipow(dim, valence.rank()) || coeffs.cols() != L.size())
    throw ShapeMismatch("polynomial coefficients have the wrong shape");
  return make_formula_field(
      "poly" + valence.str() + "^" + std::to_string(degree), valence, dim,
      [&L, coeffs, dim, degree](double, auto x, ChartId, auto out) {
        using S = scalar_of<decltype(out[0])>;
        std::array<std::array<S, JetLayout::kMaxOrder + 1>, JetLayout::kMaxVars> pw;
        for (int i = 0; i < dim; ++i) {
          pw[i][0] = S(1.0);
          for (int m = 1; m <= degree; ++m) pw[i][m] = pw[i][m - 1] * x[i];
        }
        std::vector<S> mono(L.size());
        for (int k = 0; k < L.size(); ++k) {
          const MultiIndex& a = L.monomial(k);
          S v = pw[0][a[0]];
          for (int i = 1; i < dim; ++i)
            if (a[i] > 0) v = v * pw[i][a[i]];
          mono[k] = v;
        }
        for (std::size_t f = 0; f < out.size(); ++f) {
          S acc(coeffs(f, 0));
          for (int k = 1; k < L.size(); ++k)
            if (coeffs(f, k) != 0.0) acc += coeffs(f, k) * mono[k];
          out[f] = acc;
        }
      });
}

FieldPtr trig_field(Valence valence, int dim, const Vec& offset, const Vec& amp, const Mat& wave,
                    const Vec& phase) {
  const int nc = ipow(dim, valence.rank());
  if (offset.size() != nc || amp.size() != nc || wave.rows() != nc || wave.cols() != dim ||
      phase.size() != nc)
    throw ShapeMismatch("trigonometric field parameters have the wrong shape");
  return make_formula_field("trig" + valence.str(), valence, dim,
                            [=](double, auto x, ChartId, auto out) {
                              using S = scalar_of<decltype(out[0])>;
                              using std::sin;
                              for (int f = 0; f < nc; ++f) {
                                S arg(phase[f]);
                                for (int i = 0; i < dim; ++i) arg += wave(f, i) * x[i];
                                out[f] = offset[f] + amp[f] * sin(arg);
                              }
                            });
}

FieldPtr random_polynomial_field(Valence valence, int dim, int degree, std::uint64_t seed,
                                 double scale) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(-scale, scale);
  const JetLayout& L = JetLayout::get(dim, degree);
  Mat c(ipow(dim, valence.rank()), L.size());
  for (Eigen::Index i = 0; i < c.size(); ++i) c.data()[i] = u(gen);
  return polynomial_field(valence, dim, degree, c);
}

FieldPtr random_trig_field(Valence valence, int dim, std::uint64_t seed, double scale,
                           double max_wave) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const int nc = ipow(dim, valence.rank());
  Vec offset(nc), amp(nc), phase(nc);
  Mat wave(nc, dim);
  for (int f = 0; f < nc; ++f) {
    offset[f] = scale * u(gen);
    amp[f] = scale * u(gen);
    phase[f] = std::numbers::pi * u(gen);
    for (int i = 0; i < dim; ++i) wave(f, i) = max_wave * u(gen);
  }
  return trig_field(valence, dim, offset, amp, wave, phase);
}

FieldPtr random_periodic_field(Valence valence, int dim, std::uint64_t seed, double scale) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_int_distribution<int> k(-1, 1);
  const int nc = ipow(dim, valence.rank());
  Vec offset(nc), amp(nc), phase(nc);
  Mat wave(nc, dim);
  for (int f = 0; f < nc; ++f) {
    offset[f] = scale * u(gen);
    amp[f] = scale * u(gen);
    phase[f] = std::numbers::pi * u(gen);
    for (int i = 0; i < dim; ++i) wave(f, i) = 2.0 * std::numbers::pi * k(gen);
  }
  return trig_field(valence, dim, offset, amp, wave, phase);
}

FieldPtr sphere_function(const Vec& a, const Mat& Q) {
  return make_formula_field("sphere_function", {0, 0}, 2, [a, Q](double, auto x, ChartId chart,
                                                                 auto out) {
    using S = scalar_of<decltype(out[0])>;
    const S s = x[0] * x[0] + x[1] * x[1];
    const S inv = 1.0 / (s + 1.0);
    std::array<S, 3> P{2.0 * x[0] * inv, 2.0 * x[1] * inv,
                       chart == 0 ? (s - 1.0) * inv : (1.0 - s) * inv};
    S g(0.0);
    for (int i = 0; i < 3; ++i) {
      g += a[i] * P[i];
      for (int j = 0; j < 3; ++j)
        if (Q(i, j) != 0.0) g += Q(i, j) * (P[i] * P[j]);
    }
    out[0] = g;
  });
}

FieldPtr gradient_form(FieldPtr scalar) {
  if (!(scalar->valence() == Valence{0, 0}))
    throw ValenceMismatch("gradient_form needs a scalar field");
  return std::make_shared<GradientForm>(std::move(scalar));
}

FieldPtr tensor_product(FieldPtr A, FieldPtr B) {
  if (A->dim() != B->dim()) throw ShapeMismatch("tensor product of fields of different dimension");
  return std::make_shared<TensorProduct>(std::move(A), std::move(B));
}

FieldPtr linear_combination(std::vector<FieldPtr> fields, std::vector<double> weights) {
  if (fields.empty() || fields.size() != weights.size())
    throw ShapeMismatch("linear combination needs matching fields and weights");
  int smooth = kAnalytic;
  bool c1 = true;
  for (const auto& f : fields) {
    if (!(f->valence() == fields[0]->valence()) || f->dim() != fields[0]->dim())
      throw ShapeMismatch("linear combination of fields of different shape");
    smooth = std::min(smooth, f->smoothness());
    c1 = c1 && f->time_c1();
  }
  return std::make_shared<LinearCombination>(std::move(fields), std::move(weights), smooth, c1);
}

FieldPtr time_modulated(FieldPtr field, TimeProfile profile) {
  return std::make_shared<TimeModulated>(std::move(field), std::move(profile));
}

FieldPtr with_smoothness(FieldPtr field, int smoothness) {
  return std::make_shared<DeclaredSmoothness>(std::move(field), smoothness);
}

}  // namespace kiw
