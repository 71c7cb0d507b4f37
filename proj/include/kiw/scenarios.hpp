#pragma once

#include <string>
#include <vector>

#include "kiw/verifier.hpp"

namespace kiw {

struct CatalogEntry {
  std::string name;
  Theorem theorem;
  std::string atlas;
  std::string description;
};

// Built-in scenarios in catalog order.
const std::vector<CatalogEntry>& scenario_catalog();
bool has_scenario(const std::string& name);
// Throws ConfigError for unknown names.
Scenario make_scenario(const std::string& name);

std::string catalog_text(bool machine_readable);

}  // namespace kiw
