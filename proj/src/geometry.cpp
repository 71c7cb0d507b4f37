#include "kiw/geometry.hpp"

namespace kiw {

ChartAtlas ChartAtlas::euclidean(int dim) {
  ChartAtlas a("euclidean", AtlasKind::Euclidean, dim);
  a.charts_.push_back({0, dim, Vec::Zero(dim), 1e12});
  return a;
}

ChartAtlas ChartAtlas::euclidean_patches(int dim, const std::vector<Vec>& centers, double r) {
  ChartAtlas a("euclidean", AtlasKind::Euclidean, dim);
  for (const Vec& c : centers) a.charts_.push_back({a.size(), dim, c, r});
  return a;
}

ChartAtlas ChartAtlas::torus(int dim) {
  ChartAtlas a("torus", AtlasKind::Torus, dim);
  const double r = std::sqrt(static_cast<double>(dim)) / 4.0 + 0.01;
  for (int id = 0; id < (1 << dim); ++id) {
    Vec c(dim);
    for (int i = 0; i < dim; ++i) c[i] = ((id >> i) & 1) ? 0.5 : 0.0;
    a.charts_.push_back({id, dim, c, r});
  }
  return a;
}

ChartAtlas ChartAtlas::sphere2() {
  ChartAtlas a("sphere2", AtlasKind::Sphere2, 2);
  a.charts_.push_back({0, 2, Vec::Zero(2), 1.2});
  a.charts_.push_back({1, 2, Vec::Zero(2), 1.2});
  return a;
}

ChartAtlas ChartAtlas::by_name(const std::string& name, int dim) {
  if (name == "euclidean") return euclidean(dim);
  if (name == "torus") return torus(dim);
  if (name == "sphere2") {
    if (dim != 2) throw ConfigError("sphere2 atlas has dimension 2");
    return sphere2();
  }
  throw ConfigError("unknown atlas '" + name + "'");
}

Vec ChartAtlas::to_coords(ChartId id, const Vec& p) const {
  const Chart& c = chart(id);
  switch (kind_) {
    case AtlasKind::Euclidean:
      return p;
    case AtlasKind::Torus: {
      Vec x(dim_);
      for (int i = 0; i < dim_; ++i) x[i] = p[i] - std::floor(p[i] - c.center[i] + 0.5);
      return x;
    }
    case AtlasKind::Sphere2: {
      const double d = id == 0 ? 1.0 - p[2] : 1.0 + p[2];
      if (d <= 0.0) throw OutsideOverlap("point is the projection pole of chart " + std::to_string(id));
      return Vec{{p[0] / d, p[1] / d}};
    }
  }
  return p;
}

Vec ChartAtlas::from_coords(ChartId id, const Vec& x) const {
  switch (kind_) {
    case AtlasKind::Euclidean:
      return x;
    case AtlasKind::Torus: {
      Vec p(dim_);
      for (int i = 0; i < dim_; ++i) p[i] = x[i] - std::floor(x[i]);
      return p;
    }
    case AtlasKind::Sphere2: {
      const double s = x.squaredNorm();
      const double z = id == 0 ? (s - 1.0) / (s + 1.0) : (1.0 - s) / (1.0 + s);
      return Vec{{2.0 * x[0] / (s + 1.0), 2.0 * x[1] / (s + 1.0), z}};
    }
  }
  return x;
}

bool ChartAtlas::in_overlap(ChartId from, ChartId to, const Vec& x) const {
  if (from == to) return true;
  switch (kind_) {
    case AtlasKind::Euclidean:
    case AtlasKind::Torus:
      return true;
    case AtlasKind::Sphere2: {
      const double s = x.squaredNorm();
      return s > 1e-300 && std::isfinite(s);
    }
  }
  return false;
}

Vec ChartAtlas::transition(ChartId from, ChartId to, const Vec& coords) const {
  Vec out(dim_);
  transition<double>(from, to, std::span<const double>(coords.data(), dim_),
                     std::span<double>(out.data(), dim_));
  return out;
}

Mat ChartAtlas::transition_jacobian(ChartId from, ChartId to, const Vec& coords) const {
  const JetLayout& L = JetLayout::get(dim_, 1);
  std::vector<Jet> x(dim_), y(dim_);
  for (int i = 0; i < dim_; ++i) x[i] = Jet::variable(L, i, coords[i]);
  transition<Jet>(from, to, x, y);
  Mat J(dim_, dim_);
  for (int i = 0; i < dim_; ++i)
    for (int j = 0; j < dim_; ++j) {
      MultiIndex e{0, 0, 0};
      e[j] = 1;
      J(i, j) = y[i].partial(e);
    }
  return J;
}

ChartId locate_chart(const ChartAtlas& atlas, const Vec& coords, ChartId current) {
  for (ChartId id = 0; id < atlas.size(); ++id) {
    if (!atlas.in_overlap(current, id, coords)) continue;
    const Vec x = id == current ? coords : atlas.transition(current, id, coords);
    if (atlas.chart(id).distance(x) < atlas.chart(id).radius_w()) return id;
  }
  throw NoCoveringChart("no W-ball of atlas '" + atlas.name() + "' contains the point");
}

Vec transition(const ChartAtlas& atlas, ChartId from, ChartId to, const Vec& coords) {
  if (!atlas.in_overlap(from, to, coords))
    throw OutsideOverlap("charts " + std::to_string(from) + " -> " + std::to_string(to));
  return atlas.transition(from, to, coords);
}

}  // namespace kiw
