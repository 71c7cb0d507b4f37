#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "kiw/errors.hpp"
#include "kiw/tensor.hpp"

namespace kiw {

using ChartId = int;

enum class AtlasKind { Euclidean, Torus, Sphere2 };

// One chart of an atlas: coordinates are taken relative to the same origin
// for every ball; the W/V/U balls are centered at `center` with radii
// (r, 2r, 3r).
struct Chart {
  ChartId id = 0;
  int dim = 0;
  Vec center;
  double r = 1.0;

  double radius_w() const { return r; }
  double radius_v() const { return 2.0 * r; }
  double radius_u() const { return 3.0 * r; }
  double distance(const Vec& coords) const { return (coords - center).norm(); }
};

// Abstract points are represented in an ambient form: R^n itself for the
// Euclidean atlas, angles in [0,1)^n for the torus and unit vectors in R^3
// for the sphere.
class ChartAtlas {
 public:
  static ChartAtlas euclidean(int dim);
  // Euclidean space covered by several charts with identity transitions.
  static ChartAtlas euclidean_patches(int dim, const std::vector<Vec>& centers, double r);
  static ChartAtlas torus(int dim);
  static ChartAtlas sphere2();
  static ChartAtlas by_name(const std::string& name, int dim);

  const std::string& name() const { return name_; }
  AtlasKind kind() const { return kind_; }
  int dim() const { return dim_; }
  int size() const { return static_cast<int>(charts_.size()); }
  const Chart& chart(ChartId id) const { return charts_.at(id); }

  Vec to_coords(ChartId id, const Vec& point) const;
  Vec from_coords(ChartId id, const Vec& coords) const;

  // Whether coords (in chart `from`) lie in the domain of the transition.
  bool in_overlap(ChartId from, ChartId to, const Vec& coords) const;

  template <typename S>
  void transition(ChartId from, ChartId to, std::span<const S> x, std::span<S> out) const;

  Vec transition(ChartId from, ChartId to, const Vec& coords) const;
  Mat transition_jacobian(ChartId from, ChartId to, const Vec& coords) const;

 private:
  ChartAtlas(std::string name, AtlasKind kind, int dim) : name_(std::move(name)), kind_(kind), dim_(dim) {}

  std::string name_;
  AtlasKind kind_;
  int dim_;
  std::vector<Chart> charts_;
};

ChartId locate_chart(const ChartAtlas& atlas, const Vec& coords_in_current, ChartId current);
Vec transition(const ChartAtlas& atlas, ChartId from, ChartId to, const Vec& coords);

template <typename S>
void ChartAtlas::transition(ChartId from, ChartId to, std::span<const S> x,
                            std::span<S> out) const {
  if (from == to) {
    for (int i = 0; i < dim_; ++i) out[i] = x[i];
    return;
  }
  switch (kind_) {
    case AtlasKind::Euclidean:
      for (int i = 0; i < dim_; ++i) out[i] = x[i];
      return;
    case AtlasKind::Torus: {
      const Vec& c = charts_.at(to).center;
      for (int i = 0; i < dim_; ++i) {
        const double shift = -std::floor(value_of(x[i]) - c[i] + 0.5);
        out[i] = x[i] + shift;
      }
      return;
    }
    case AtlasKind::Sphere2: {
      const double s0 = value_of(x[0]) * value_of(x[0]) + value_of(x[1]) * value_of(x[1]);
      if (!(s0 > 1e-300) || !std::isfinite(s0))
        throw OutsideOverlap("stereographic transition undefined at the chart origin");
      const S s = x[0] * x[0] + x[1] * x[1];
      out[0] = x[0] / s;
      out[1] = x[1] / s;
      return;
    }
  }
}

}  // namespace kiw
