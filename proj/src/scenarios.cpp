#include "kiw/scenarios.hpp"

#include <cmath>
#include <sstream>

#include <json.hpp>

#include "kiw/field_library.hpp"

namespace kiw {

namespace {

constexpr Valence kScalar{0, 0};
constexpr Valence kVector{1, 0};
constexpr Valence kOneForm{0, 1};
constexpr Valence kMixed{1, 1};

std::shared_ptr<const ChartAtlas> atlas(const std::string& name, int dim) {
  return std::make_shared<ChartAtlas>(ChartAtlas::by_name(name, dim));
}

Vec vec(std::initializer_list<double> v) {
  Vec out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

FieldPtr planar_drift(std::uint64_t seed) {
  Mat A(2, 2);
  A << -0.2, 0.3, -0.3, -0.1;
  return linear_combination(
      {linear_vector_field(A, Vec::Zero(2)), random_trig_field(kVector, 2, seed, 0.3)}, {1.0, 1.0});
}

FieldPtr planar_noise(std::uint64_t seed) {
  return linear_combination({rotation_field(0.3), random_trig_field(kVector, 2, seed, 0.3, 1.5)},
                            {1.0, 1.0});
}

// One FV driver A_t = t and one martingale M = B^2, independent of the flow
// noise B^1.
DriverSpec wired_drivers() {
  DriverSpec d;
  d.brownian_dims = 2;
  d.fv = {FvSpec{FvSpec::Kind::Linear, 1.0, 0.0}};
  d.mart = {MartSpec{MartSpec::Kind::Brownian, 1, 1.0, 0.0}};
  return d;
}

Scenario base(std::string name, Theorem theorem, std::string atlas_name, int dim) {
  Scenario s;
  s.name = std::move(name);
  s.theorem = theorem;
  s.atlas = std::move(atlas_name);
  s.sde.atlas = atlas(s.atlas, dim);
  s.sde.b = zero_field(kVector, dim);
  s.x0 = Vec::Zero(dim);
  s.drivers.brownian_dims = 1;
  return s;
}

// R^2 mixed tensor transported by a nonlinear flow, G wired to A and M.
Scenario planar_kiw(std::string name, Theorem theorem) {
  Scenario s = base(std::move(name), theorem, "euclidean", 2);
  s.sde.b = planar_drift(21);
  s.sde.xi = {planar_noise(22)};
  s.K0 = random_trig_field(kMixed, 2, 23, 1.0);
  s.G = {time_modulated(random_trig_field(kMixed, 2, 24, 0.5), TimeProfile::cosine(1.0, 2.0))};
  s.drivers = wired_drivers();
  s.x0 = vec({0.3, -0.2});
  return s;
}

// Adds a second, non-commuting noise field; M moves to B^3.
void with_second_noise(Scenario& s) {
  s.sde.xi.push_back(random_trig_field(kVector, 2, 25, 0.4, 1.5));
  s.drivers.brownian_dims = 3;
  s.drivers.mart[0].component = 2;
}

Scenario identity() {
  Scenario s = base("identity", Theorem::KiwItoPullback, "euclidean", 2);
  s.description = "zero SDE; K driven by A_t = t and M = B";
  s.K0 = random_trig_field(kMixed, 2, 11, 1.0);
  s.G = {random_trig_field(kMixed, 2, 12, 0.5)};
  s.drivers.fv = {FvSpec{FvSpec::Kind::Linear, 1.0, 0.0}};
  s.drivers.mart = {MartSpec{MartSpec::Kind::Brownian, 0, 1.0, 0.0}};
  s.x0 = vec({0.4, 0.1});
  return s;
}

Scenario deterministic() {
  Scenario s = base("deterministic", Theorem::KiwItoPullback, "euclidean", 2);
  s.description = "xi = 0, nonlinear drift, K driven by A_t = sin(2t)";
  s.sde.b = planar_drift(31);
  s.K0 = random_trig_field(kMixed, 2, 32, 1.0);
  s.G = {random_trig_field(kMixed, 2, 33, 0.5)};
  s.drivers.fv = {FvSpec{FvSpec::Kind::Sine, 1.0, 2.0}};
  s.drivers.mart = {MartSpec{}};
  s.x0 = vec({0.3, -0.2});
  s.paths = 8;
  return s;
}

Scenario kunita_sphere() {
  Scenario s = base("kunita_sphere", Theorem::KunitaSecond, "sphere2", 2);
  s.description = "static 1-form on S^2 under rotation noise";
  s.sde.b = sphere_rotation_field(0.0, 0.0, 1.0);
  s.sde.xi = {sphere_rotation_field(0.8, 0.0, 0.0), sphere_rotation_field(0.0, 0.6, 0.0)};
  Mat Q(3, 3);
  Q << 0.5, 0.2, 0.0, 0.2, -0.3, 0.1, 0.0, 0.1, 0.4;
  s.K0 = gradient_form(sphere_function(vec({0.3, -0.5, 0.7}), Q));
  s.drivers.brownian_dims = 2;
  s.x0 = vec({0.3, 0.2});
  return s;
}

Scenario gbm_one_form() {
  Scenario s = base("gbm_one_form", Theorem::KiwItoPullback, "euclidean", 1);
  s.description = "K = dx under dX = X o dB; closed form exp(B_t) dx";
  s.sde.xi = {dilation_field(1, 1.0)};
  s.K0 = coordinate_form(1, 0);
  s.x0 = vec({1.0});
  s.exact_lhs = [](const DrivingPaths& d, int k) {
    TensorValue v(kOneForm, 1);
    v[0] = std::exp(d.bm[0][k]);
    return v;
  };
  return s;
}

Scenario scalar_ito_wentzell() {
  Scenario s = base("scalar_ito_wentzell", Theorem::ScalarItoWentzell, "euclidean", 2);
  s.description = "scalar K driven by A_t = t and M = B^2";
  s.sde.b = planar_drift(41);
  s.sde.xi = {planar_noise(42)};
  s.K0 = random_trig_field(kScalar, 2, 43, 1.0);
  s.G = {random_trig_field(kScalar, 2, 44, 0.5)};
  s.drivers = wired_drivers();
  s.x0 = vec({0.3, -0.2});
  return s;
}

Scenario kunita_first() {
  Scenario s = base("kunita_first", Theorem::KunitaFirst, "euclidean", 2);
  s.description = "push-forward of a static vector field";
  s.sde.b = planar_drift(51);
  s.sde.xi = {planar_noise(52)};
  s.K0 = random_trig_field(kVector, 2, 53, 1.0);
  s.x0 = vec({0.3, -0.2});
  return s;
}

Scenario torus_transport() {
  Scenario s = base("torus_transport", Theorem::KiwItoPullback, "torus", 2);
  s.description = "periodic 1-form on T^2 under periodic drift and noise";
  s.sde.b = periodic_vector_field(2, 0.3, vec({0.5, 0.2}), vec({0.0, 1.0}));
  s.sde.xi = {periodic_vector_field(2, 0.2, vec({0.3, -0.4}), vec({0.5, 0.0}))};
  s.K0 = random_periodic_field(kOneForm, 2, 61, 1.0);
  s.G = {random_periodic_field(kOneForm, 2, 62, 0.5)};
  s.drivers = wired_drivers();
  s.x0 = vec({0.3, 0.6});
  return s;
}

Scenario blowup() {
  Scenario s = base("blowup", Theorem::KiwItoPullback, "euclidean", 1);
  s.description = "dX = X^2 dt + 0.1 o dB from x = 1.5, explodes near t = 2/3";
  s.sde.b = power_field(1.0, 2);
  s.sde.xi = {constant_field(kVector, 1, vec({0.1}))};
  s.sde.r_max = 1e3;
  s.K0 = coordinate_form(1, 0);
  s.x0 = vec({1.5});
  s.paths = 20;
  return s;
}

struct Builder {
  std::string name;
  Scenario (*make)();
};

const std::vector<Builder>& builders() {
  static const std::vector<Builder> all{
      {"identity", identity},
      {"deterministic", deterministic},
      {"kunita_sphere", kunita_sphere},
      {"kiw_ito_pullback",
       [] {
         Scenario s = planar_kiw("kiw_ito_pullback", Theorem::KiwItoPullback);
         s.description = "R^2 (1,1)-tensor, A_t = t, M = B^2";
         return s;
       }},
      {"gbm_one_form", gbm_one_form},
      {"kiw_ito_pushforward",
       [] {
         Scenario s = planar_kiw("kiw_ito_pushforward", Theorem::KiwItoPushforward);
         s.description = "push-forward of an R^2 (1,1)-tensor, A_t = t, M = B^2";
         s.grid.steps = 32;
         return s;
       }},
      {"kiw_strat_pullback",
       [] {
         Scenario s = planar_kiw("kiw_strat_pullback", Theorem::KiwStratPullback);
         s.description = "Heun flow with two noise fields, R^2 (1,1)-tensor, A_t = t, M = B^3";
         with_second_noise(s);
         return s;
       }},
      {"kiw_strat_pushforward",
       [] {
         Scenario s = planar_kiw("kiw_strat_pushforward", Theorem::KiwStratPushforward);
         s.description = "Heun flow with two noise fields, push-forward of an R^2 (1,1)-tensor";
         with_second_noise(s);
         s.grid.steps = 32;
         return s;
       }},
      {"kunita_first", [] {
         Scenario s = kunita_first();
         s.grid.steps = 32;
         return s;
       }},
      {"scalar_ito_wentzell", scalar_ito_wentzell},
      {"torus_transport", torus_transport},
      {"blowup", blowup},
  };
  return all;
}

}  // namespace

const std::vector<CatalogEntry>& scenario_catalog() {
  static const std::vector<CatalogEntry> catalog = [] {
    std::vector<CatalogEntry> out;
    for (const Builder& b : builders()) {
      const Scenario s = b.make();
      out.push_back({s.name, s.theorem, s.atlas, s.description});
    }
    return out;
  }();
  return catalog;
}

bool has_scenario(const std::string& name) {
  for (const Builder& b : builders())
    if (b.name == name) return true;
  return false;
}

Scenario make_scenario(const std::string& name) {
  for (const Builder& b : builders())
    if (b.name == name) return b.make();
  throw ConfigError("unknown scenario '" + name + "'");
}

std::string catalog_text(bool machine_readable) {
  if (machine_readable) {
    nlohmann::ordered_json j = nlohmann::ordered_json::array();
    for (const CatalogEntry& e : scenario_catalog())
      j.push_back({{"name", e.name},
                   {"theorem", to_string(e.theorem)},
                   {"atlas", e.atlas},
                   {"description", e.description}});
    return j.dump(2) + "\n";
  }
  std::ostringstream os;
  for (const CatalogEntry& e : scenario_catalog()) {
    os << e.name;
    for (std::size_t pad = e.name.size(); pad < 24; ++pad) os << ' ';
    os << to_string(e.theorem) << "  [" << e.atlas << "]  " << e.description << '\n';
  }
  return os.str();
}

}  // namespace kiw
