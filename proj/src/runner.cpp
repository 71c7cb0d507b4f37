#include "kiw/runner.hpp"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <thread>

#include <json.hpp>

#ifndef KIW_VERSION
#define KIW_VERSION "unknown"
#endif

namespace kiw {

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream f(p, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write '" + p.string() + "'");
  f << text;
  if (!f) throw std::runtime_error("write failed for '" + p.string() + "'");
}

}  // namespace

int default_workers() {
  if (const char* env = std::getenv("KIW_WORKERS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

std::string report_csv(const ResidualReport& rep) {
  std::string out =
      "level,steps,h,paths_used,blown_up,rms_sup_residual,local_order,fitted_order,"
      "rms_sup_exact_error,exact_fitted_order";
  for (const char* t : term_names()) out += std::string(",l1_") + t;
  out += ",jac_consistency_max\n";
  for (const LevelStats& l : rep.levels) {
    out += std::to_string(l.level) + "," + std::to_string(l.steps) + "," + num(l.h) + "," +
           std::to_string(l.paths_used) + "," + std::to_string(l.blown_up) + "," +
           num(l.rms_sup_residual) + "," + num(l.local_order) + "," + num(rep.fitted_order) +
           "," + num(l.rms_sup_exact_error) + "," + num(rep.exact_fitted_order);
    for (double t : l.term_l1) out += "," + num(t);
    out += "," + num(l.jac_consistency_max) + "\n";
  }
  return out;
}

std::string run_manifest(const RunConfig& cfg, const Scenario& scn) {
  nlohmann::ordered_json j;
  j["library_version"] = KIW_VERSION;
  j["scenario"] = cfg.scenario;
  j["name"] = scn.name;
  j["theorem"] = to_string(scn.theorem);
  j["atlas"] = scn.atlas;
  j["scheme"] = to_string(scn.scheme());
  j["seed"] = scn.seed;
  j["paths"] = scn.paths;
  j["levels"] = scn.levels;
  j["T"] = scn.grid.T;
  j["base_steps"] = scn.grid.steps;
  j["bracket"] = to_string(scn.bracket);
  j["x0"] = std::vector<double>(scn.x0.data(), scn.x0.data() + scn.x0.size());
  j["K0"] = scn.K0->describe();
  nlohmann::ordered_json fields = nlohmann::ordered_json::array();
  for (const FieldPtr& g : scn.G) fields.push_back(g->describe());
  j["G"] = fields;
  j["b"] = scn.sde.b->describe();
  nlohmann::ordered_json xi = nlohmann::ordered_json::array();
  for (const FieldPtr& f : scn.sde.xi) xi.push_back(f->describe());
  j["xi"] = xi;
  j["brownian_dims"] = scn.drivers.brownian_dims;
  nlohmann::ordered_json fv = nlohmann::ordered_json::array(), mart = nlohmann::ordered_json::array();
  for (const FvSpec& a : scn.drivers.fv) fv.push_back(a.describe());
  for (const MartSpec& m : scn.drivers.mart) mart.push_back(m.describe());
  j["fv_drivers"] = fv;
  j["martingale_drivers"] = mart;
  nlohmann::ordered_json entries = nlohmann::ordered_json::object();
  for (const auto& [k, v] : cfg.entries) entries[k] = v;
  j["config"] = entries;
  return j.dump(2) + "\n";
}

int run(const RunConfig& cfg, int workers, std::ostream& log, std::ostream& err) {
  Scenario scn;
  try {
    scn = build_scenario(cfg);
  } catch (const HypothesisViolation& e) {
    err << e.what() << "\n";
    return kExitHypothesis;
  } catch (const SchemeSmoothnessMismatch& e) {
    err << e.what() << "\n";
    return kExitHypothesis;
  } catch (const Error& e) {
    err << e.what() << "\n";
    return kExitIo;
  }

  ResidualReport rep;
  try {
    rep = convergence_study(scn, workers);
  } catch (const InsufficientSmoothness& e) {
    err << e.what() << "\n";
    return kExitHypothesis;
  } catch (const std::exception& e) {
    err << e.what() << "\n";
    return kExitIo;
  }

  try {
    const std::filesystem::path dir(cfg.out);
    std::filesystem::create_directories(dir);
    const std::string name = scn.name;
    write_file(dir / (name + ".csv"), report_csv(rep));
    write_file(dir / (name + ".manifest.json"), run_manifest(cfg, scn));
    log << scn.name << " (" << to_string(scn.theorem) << "): fitted order "
        << num(rep.fitted_order) << ", wrote " << (dir / (name + ".csv")).string() << "\n";
  } catch (const std::exception& e) {
    err << e.what() << "\n";
    return kExitIo;
  }

  if (rep.blown_fraction > 0.5) {
    err << "FlowStopped: " << rep.levels.back().blown_up << " of " << rep.paths
        << " paths blew up before T\n";
    return kExitBlowUp;
  }
  return kExitOk;
}

}  // namespace kiw
