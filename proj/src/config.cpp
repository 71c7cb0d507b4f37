#include "kiw/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "kiw/field_library.hpp"
#include "kiw/scenarios.hpp"

namespace kiw {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& v) {
  T out{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size())
    throw ConfigError("'" + key + "' expects a number, got '" + v + "'");
  return out;
}

// from_chars for double is missing in some standard libraries.
double parse_double(const std::string& key, const std::string& v) {
  std::istringstream is(v);
  is.imbue(std::locale::classic());
  double out;
  if (!(is >> out) || !is.eof()) throw ConfigError("'" + key + "' expects a number, got '" + v + "'");
  return out;
}

int parse_positive(const std::string& key, const std::string& v) {
  const int n = parse_number<int>(key, v);
  if (n < 1) throw ConfigError("'" + key + "' must be at least 1");
  return n;
}

Vec parse_vec(const std::string& key, const std::string& v) {
  std::vector<double> xs;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) xs.push_back(parse_double(key, trim(item)));
  return Eigen::Map<Vec>(xs.data(), static_cast<Eigen::Index>(xs.size()));
}

}  // namespace

RunConfig parse_config(const std::string& text) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string v = trim(line.substr(eq + 1));
    if (key.empty() || v.empty())
      throw ConfigError("line " + std::to_string(lineno) + ": empty key or value");
    cfg.entries.emplace_back(key, v);
    if (key == "run.scenario") {
      cfg.scenario = v;
    } else if (key == "run.name") {
      cfg.name = v;
    } else if (key == "run.seed") {
      cfg.seed = parse_number<std::uint64_t>(key, v);
    } else if (key == "run.paths") {
      cfg.paths = parse_positive(key, v);
    } else if (key == "run.levels") {
      cfg.levels = parse_positive(key, v);
    } else if (key == "run.out") {
      cfg.out = v;
    } else if (key == "grid.T") {
      cfg.T = parse_double(key, v);
      if (!(*cfg.T > 0.0)) throw ConfigError("'grid.T' must be positive");
    } else if (key == "grid.steps") {
      cfg.steps = parse_positive(key, v);
    } else if (key == "verifier.theorem") {
      theorem_from_string(v);
      cfg.theorem = v;
    } else if (key == "verifier.bracket") {
      if (v != "realized" && v != "closed_form")
        throw ConfigError("'verifier.bracket' must be realized or closed_form");
      cfg.bracket = v;
    } else if (key == "flow.scheme") {
      if (v != "euler_ito" && v != "heun_stratonovich")
        throw ConfigError("'flow.scheme' must be euler_ito or heun_stratonovich");
      cfg.scheme = v;
    } else if (key == "flow.smoothness") {
      cfg.flow_smoothness = parse_number<int>(key, v);
    } else if (key == "fields.K.smoothness") {
      cfg.K_smoothness = parse_number<int>(key, v);
    } else if (key == "fields.G.smoothness") {
      cfg.G_smoothness = parse_number<int>(key, v);
    } else if (key == "scenario.x0") {
      cfg.x0 = parse_vec(key, v);
    } else {
      throw ConfigError("line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
  }
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot read config '" + path + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str());
}

Scenario build_scenario(const RunConfig& cfg) {
  if (cfg.scenario.empty()) throw ConfigError("no scenario selected (run.scenario)");
  Scenario s = make_scenario(cfg.scenario);
  if (!cfg.name.empty()) s.name = cfg.name;
  s.seed = cfg.seed;
  if (cfg.paths) s.paths = *cfg.paths;
  if (cfg.levels) s.levels = *cfg.levels;
  if (cfg.T) s.grid.T = *cfg.T;
  if (cfg.steps) s.grid.steps = *cfg.steps;
  if (cfg.theorem) s.theorem = theorem_from_string(*cfg.theorem);
  if (cfg.bracket) s.bracket = *cfg.bracket == "closed_form" ? BracketMode::ClosedForm
                                                              : BracketMode::Realized;
  if (cfg.x0) s.x0 = *cfg.x0;
  if (cfg.flow_smoothness) {
    s.sde.b = with_smoothness(s.sde.b, *cfg.flow_smoothness);
    for (FieldPtr& xi : s.sde.xi) xi = with_smoothness(xi, *cfg.flow_smoothness);
  }
  if (cfg.K_smoothness) s.K0 = with_smoothness(s.K0, *cfg.K_smoothness);
  if (cfg.G_smoothness)
    for (FieldPtr& g : s.G) g = with_smoothness(g, *cfg.G_smoothness);
  if (cfg.scheme && *cfg.scheme != to_string(s.scheme()))
    throw HypothesisViolation(requirements(s.theorem).label + " is verified with the " +
                              to_string(s.scheme()) + " scheme, not " + *cfg.scheme);
  validate(s);
  return s;
}

}  // namespace kiw
