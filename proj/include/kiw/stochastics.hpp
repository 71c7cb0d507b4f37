#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "kiw/tensor.hpp"

namespace kiw {

// Philox4x32-10 block function.
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key);

// Counter-based stream keyed by the run seed. Draws are addressed by
// (path, component, level, index), so any draw can be recomputed
// independently of execution order.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint32_t path) : seed_(seed), path_(path) {}

  std::uint64_t seed() const { return seed_; }
  std::uint32_t path() const { return path_; }

  // Standard normal via Box-Muller on one Philox block.
  double normal(std::uint32_t component, std::uint32_t level, std::uint32_t index) const;
  // Uniform on (0,1).
  double uniform(std::uint32_t component, std::uint32_t level, std::uint32_t index) const;

 private:
  std::array<std::uint32_t, 4> block(std::uint32_t component, std::uint32_t level,
                                     std::uint32_t index) const;

  std::uint64_t seed_;
  std::uint32_t path_;
};

struct TimeGrid {
  double T = 1.0;
  int steps = 1;

  double h() const { return T / steps; }
  double t(int k) const { return k * h(); }
  bool operator==(const TimeGrid&) const = default;
};

struct Path {
  TimeGrid grid;
  Vec values;

  double operator[](int k) const { return values[k]; }
  double increment(int k) const { return values[k + 1] - values[k]; }
};

Path constant_path(const TimeGrid& grid, double c);
Path sampled_path(const TimeGrid& grid, const std::function<double(double)>& f);

// Finite-variation driver A with A_0 = 0.
struct FvSpec {
  enum class Kind { Zero, Linear, Sine, Quadratic };
  Kind kind = Kind::Zero;
  double a = 0.0;
  double b = 0.0;

  double value(double t) const;
  std::string describe() const;
};

// Martingale driver: a scaled Brownian component c0 * B^j, or the Ito
// integral of sigma(s) = c0 + c1 s against B^j.
struct MartSpec {
  enum class Kind { Zero, Brownian, SigmaIntegral };
  Kind kind = Kind::Zero;
  int component = 0;
  double c0 = 1.0;
  double c1 = 0.0;

  // Closed-form [M, B^j]_t.
  double bracket(int j, double t) const;
  std::string describe() const;
};

struct DriverSpec {
  int brownian_dims = 1;
  std::vector<FvSpec> fv;
  std::vector<MartSpec> mart;
};

struct DrivingPaths {
  TimeGrid grid;
  int level = 0;
  DriverSpec spec;
  std::vector<Path> bm;
  std::vector<Path> fv;
  std::vector<Path> mart;
};

std::vector<Path> sample_brownian(const TimeGrid& grid, int dims, const RngStream& rng);
DrivingPaths sample_drivers(const DriverSpec& spec, const TimeGrid& grid, const RngStream& rng);
// Doubles the resolution; the coarse-grid restriction is bitwise unchanged.
DrivingPaths refine_dyadic(const DrivingPaths& paths, const RngStream& rng);

Path ito_integral(const Path& integrand, const Path& integrator);
Path stratonovich_integral(const Path& integrand, const Path& integrator);
Path covariation(const Path& x, const Path& y);
Path fv_integral(const Path& integrand, const Path& integrator);
double total_variation(const Path& p);

}  // namespace kiw
