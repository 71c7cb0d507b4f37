#include <iostream>

#include <CLI11.hpp>

#include "kiw/runner.hpp"
#include "kiw/scenarios.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Kunita-Ito-Wentzell verifier: residuals and convergence orders on shared noise"};
  std::string config_path, scenario, out;
  std::uint64_t seed = 0;
  int paths = 0, levels = 0;
  bool list = false, machine = false;
  app.add_option("--config", config_path, "run configuration file");
  app.add_option("--scenario", scenario, "built-in scenario (overrides run.scenario)");
  auto* seed_opt = app.add_option("--seed", seed, "random seed");
  app.add_option("--paths", paths, "ensemble size")->check(CLI::PositiveNumber);
  app.add_option("--levels", levels, "dyadic refinement levels")->check(CLI::PositiveNumber);
  app.add_option("--out", out, "output directory");
  app.add_flag("--list", list, "print the built-in scenario catalog");
  app.add_flag("--machine-readable", machine, "emit the catalog as JSON");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kiw::kExitOk : kiw::kExitIo;
  }

  if (list) {
    std::cout << kiw::catalog_text(machine);
    return kiw::kExitOk;
  }

  kiw::RunConfig cfg;
  try {
    if (!config_path.empty()) cfg = kiw::load_config(config_path);
  } catch (const kiw::Error& e) {
    std::cerr << e.what() << "\n";
    return kiw::kExitIo;
  }
  if (!scenario.empty()) cfg.scenario = scenario;
  if (*seed_opt) cfg.seed = seed;
  if (paths > 0) cfg.paths = paths;
  if (levels > 0) cfg.levels = levels;
  if (!out.empty()) cfg.out = out;
  if (cfg.scenario.empty()) {
    std::cerr << "ConfigError: give --config or --scenario (see --list)\n";
    return kiw::kExitIo;
  }
  return kiw::run(cfg, kiw::default_workers(), std::cout, std::cerr);
}
