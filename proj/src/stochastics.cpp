#include "kiw/stochastics.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace kiw {

namespace {

constexpr std::uint32_t kM0 = 0xD2511F53u;
constexpr std::uint32_t kM1 = 0xCD9E8D57u;
constexpr std::uint32_t kW0 = 0x9E3779B9u;
constexpr std::uint32_t kW1 = 0xBB67AE85u;

void check_grid(const Path& a, const Path& b) {
  if (!(a.grid == b.grid) || a.values.size() != b.values.size())
    throw GridMismatch("paths live on different grids (" + std::to_string(a.grid.steps) + " vs " +
                       std::to_string(b.grid.steps) + " steps)");
}

double to_unit(std::uint32_t hi, std::uint32_t lo) {
  const std::uint64_t bits = ((static_cast<std::uint64_t>(hi) << 32) | lo) >> 11;
  return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
}

std::string num(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

}  // namespace

std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> c,
                                        std::array<std::uint32_t, 2> k) {
  for (int round = 0; round < 10; ++round) {
    const std::uint64_t p0 = static_cast<std::uint64_t>(kM0) * c[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(kM1) * c[2];
    const std::uint32_t hi0 = p0 >> 32, lo0 = static_cast<std::uint32_t>(p0);
    const std::uint32_t hi1 = p1 >> 32, lo1 = static_cast<std::uint32_t>(p1);
    c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
    k[0] += kW0;
    k[1] += kW1;
  }
  return c;
}

std::array<std::uint32_t, 4> RngStream::block(std::uint32_t component, std::uint32_t level,
                                              std::uint32_t index) const {
  return philox4x32({index, level, component, path_},
                    {static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32)});
}

double RngStream::uniform(std::uint32_t component, std::uint32_t level, std::uint32_t index) const {
  const auto b = block(component, level, index);
  return to_unit(b[0], b[1]);
}

double RngStream::normal(std::uint32_t component, std::uint32_t level, std::uint32_t index) const {
  const auto b = block(component, level, index);
  const double u1 = to_unit(b[0], b[1]);
  const double u2 = to_unit(b[2], b[3]);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

Path constant_path(const TimeGrid& grid, double c) {
  return {grid, Vec::Constant(grid.steps + 1, c)};
}

Path sampled_path(const TimeGrid& grid, const std::function<double(double)>& f) {
  Path p{grid, Vec(grid.steps + 1)};
  for (int k = 0; k <= grid.steps; ++k) p.values[k] = f(grid.t(k));
  return p;
}

double FvSpec::value(double t) const {
  switch (kind) {
    case Kind::Zero:
      return 0.0;
    case Kind::Linear:
      return a * t;
    case Kind::Sine:
      return a * std::sin(b * t);
    case Kind::Quadratic:
      return a * t + 0.5 * b * t * t;
  }
  return 0.0;
}

std::string FvSpec::describe() const {
  switch (kind) {
    case Kind::Zero:
      return "zero";
    case Kind::Linear:
      return "linear(" + num(a) + ")";
    case Kind::Sine:
      return "sine(" + num(a) + "," + num(b) + ")";
    case Kind::Quadratic:
      return "quadratic(" + num(a) + "," + num(b) + ")";
  }
  return "";
}

double MartSpec::bracket(int j, double t) const {
  if (kind == Kind::Zero || j != component) return 0.0;
  if (kind == Kind::Brownian) return c0 * t;
  return c0 * t + 0.5 * c1 * t * t;
}

std::string MartSpec::describe() const {
  switch (kind) {
    case Kind::Zero:
      return "zero";
    case Kind::Brownian:
      return "brownian(" + std::to_string(component) + "," + num(c0) + ")";
    case Kind::SigmaIntegral:
      return "sigma_integral(" + std::to_string(component) + "," + num(c0) + "," + num(c1) + ")";
  }
  return "";
}

std::vector<Path> sample_brownian(const TimeGrid& grid, int dims, const RngStream& rng) {
  std::vector<Path> bm;
  const double sh = std::sqrt(grid.h());
  for (int j = 0; j < dims; ++j) {
    Path p{grid, Vec::Zero(grid.steps + 1)};
    for (int k = 0; k < grid.steps; ++k)
      p.values[k + 1] = p.values[k] + sh * rng.normal(static_cast<std::uint32_t>(j), 0, k);
    bm.push_back(std::move(p));
  }
  return bm;
}

namespace {

void build_dependent(DrivingPaths& d) {
  d.fv.clear();
  d.mart.clear();
  for (const FvSpec& f : d.spec.fv)
    d.fv.push_back(sampled_path(d.grid, [&f](double t) { return f.value(t); }));
  for (const MartSpec& m : d.spec.mart) {
    if (m.kind != MartSpec::Kind::Zero &&
        (m.component < 0 || m.component >= static_cast<int>(d.bm.size())))
      throw WiringMismatch("martingale driver uses Brownian component " +
                           std::to_string(m.component) + " of " + std::to_string(d.bm.size()));
    switch (m.kind) {
      case MartSpec::Kind::Zero:
        d.mart.push_back(constant_path(d.grid, 0.0));
        break;
      case MartSpec::Kind::Brownian: {
        Path p = d.bm[m.component];
        p.values *= m.c0;
        d.mart.push_back(std::move(p));
        break;
      }
      case MartSpec::Kind::SigmaIntegral: {
        const Path sigma = sampled_path(d.grid, [&m](double t) { return m.c0 + m.c1 * t; });
        d.mart.push_back(ito_integral(sigma, d.bm[m.component]));
        break;
      }
    }
  }
}

}  // namespace

DrivingPaths sample_drivers(const DriverSpec& spec, const TimeGrid& grid, const RngStream& rng) {
  if (spec.fv.size() != spec.mart.size())
    throw WiringMismatch("each G_i needs one finite-variation and one martingale driver");
  DrivingPaths d;
  d.grid = grid;
  d.spec = spec;
  d.bm = sample_brownian(grid, spec.brownian_dims, rng);
  build_dependent(d);
  return d;
}

DrivingPaths refine_dyadic(const DrivingPaths& paths, const RngStream& rng) {
  DrivingPaths d;
  d.grid = {paths.grid.T, 2 * paths.grid.steps};
  d.level = paths.level + 1;
  d.spec = paths.spec;
  const double H = paths.grid.h();
  const double sd = std::sqrt(0.25 * H);
  for (std::size_t j = 0; j < paths.bm.size(); ++j) {
    const Vec& old = paths.bm[j].values;
    Path p{d.grid, Vec(d.grid.steps + 1)};
    for (int k = 0; k < paths.grid.steps; ++k) {
      p.values[2 * k] = old[k];
      p.values[2 * k + 1] =
          0.5 * (old[k] + old[k + 1]) +
          sd * rng.normal(static_cast<std::uint32_t>(j), static_cast<std::uint32_t>(d.level), k);
    }
    p.values[d.grid.steps] = old[paths.grid.steps];
    d.bm.push_back(std::move(p));
  }
  build_dependent(d);
  for (std::size_t i = 0; i < d.fv.size(); ++i)
    for (int k = 0; k <= paths.grid.steps; ++k) d.fv[i].values[2 * k] = paths.fv[i].values[k];
  return d;
}

Path ito_integral(const Path& integrand, const Path& integrator) {
  check_grid(integrand, integrator);
  const int L = integrator.grid.steps;
  Path out{integrator.grid, Vec(L + 1)};
  out.values[0] = 0.0;
  // Left endpoints only: integrand[k] for k < L.
  for (int k = 0; k < L; ++k)
    out.values[k + 1] = out.values[k] + integrand.values[k] * integrator.increment(k);
  return out;
}

Path stratonovich_integral(const Path& integrand, const Path& integrator) {
  check_grid(integrand, integrator);
  const int L = integrator.grid.steps;
  Path out{integrator.grid, Vec(L + 1)};
  out.values[0] = 0.0;
  for (int k = 0; k < L; ++k)
    out.values[k + 1] = out.values[k] + 0.5 * (integrand.values[k] + integrand.values[k + 1]) *
                                            integrator.increment(k);
  return out;
}

Path covariation(const Path& x, const Path& y) {
  check_grid(x, y);
  const int L = x.grid.steps;
  Path out{x.grid, Vec(L + 1)};
  out.values[0] = 0.0;
  for (int k = 0; k < L; ++k) out.values[k + 1] = out.values[k] + x.increment(k) * y.increment(k);
  return out;
}

Path fv_integral(const Path& integrand, const Path& integrator) {
  return ito_integral(integrand, integrator);
}

double total_variation(const Path& p) {
  double v = 0.0;
  for (int k = 0; k < p.grid.steps; ++k) v += std::abs(p.increment(k));
  return v;
}

}  // namespace kiw
