#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "jbasim/config.hpp"

namespace jbasim {

struct DispatchOutcome {
  int exit_code = 0;
  std::vector<std::string> outputs;  // files written, relative to output_dir
  std::string summary;
};

// Runs the configured experiment and writes results.csv, results_long.csv and
// metadata.json (plus traces/*.csv for shot_trace) under config.output_dir.
// Returns nonzero on per-point fatal errors or an empty result.
DispatchOutcome dispatch(const RunConfig& config, std::ostream& log);

}  // namespace jbasim
