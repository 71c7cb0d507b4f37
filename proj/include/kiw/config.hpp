#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "kiw/verifier.hpp"

namespace kiw {

// Flat "key = value" run configuration with dotted keys; '#' starts a
// comment. Keys are listed in docs/config.md.
struct RunConfig {
  std::string scenario;
  std::string name;
  std::uint64_t seed = 1;
  std::optional<int> paths;
  std::optional<int> levels;
  std::string out = "out";
  std::optional<double> T;
  std::optional<int> steps;
  std::optional<std::string> theorem;
  std::optional<std::string> bracket;
  std::optional<std::string> scheme;
  std::optional<int> flow_smoothness;
  std::optional<int> K_smoothness;
  std::optional<int> G_smoothness;
  std::optional<Vec> x0;
  // Entries as read, in file order.
  std::vector<std::pair<std::string, std::string>> entries;

  std::string report_name() const { return name.empty() ? scenario : name; }
};

// Throws ConfigError with the offending line.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);

// Built-in scenario with the overrides applied and its hypotheses checked.
Scenario build_scenario(const RunConfig& cfg);

}  // namespace kiw
