#pragma once

#include <ostream>
#include <string>

#include "kiw/config.hpp"
#include "kiw/verifier.hpp"

namespace kiw {

enum ExitCode { kExitOk = 0, kExitIo = 1, kExitHypothesis = 2, kExitBlowUp = 3 };

// KIW_WORKERS if set, otherwise the hardware concurrency.
int default_workers();

// Fixed column order, %.17g numbers, LF line endings.
std::string report_csv(const ResidualReport& rep);
std::string run_manifest(const RunConfig& cfg, const Scenario& scn);

// Builds, runs and writes <out>/<name>.csv and <out>/<name>.manifest.json.
// Errors are reported on `err`; the return value is an ExitCode.
int run(const RunConfig& cfg, int workers, std::ostream& log, std::ostream& err);

}  // namespace kiw
