#pragma once

#include <string>
#include <vector>

#include "jbasim/config.hpp"
#include "jbasim/protocols.hpp"

namespace jbasim {

// Deterministic numeric formatting shared by every writer ("%.10g"; NaN spelled
// out), so identical results are identical bytes.
std::string format_number(double v);

void write_results_csv(const std::string& path, const ExperimentResult& result);

// Long (plot-ready) format: series,x,y,y_err rows.
void write_long_csv(const std::string& path, const ExperimentResult& result);

std::string config_hash(const RunConfig& config);

void write_metadata(const std::string& path, const RunConfig& config,
                    const ExperimentResult& result, const std::vector<std::string>& outputs);

struct Summary {
  std::string text;
  bool ok = false;
};

// Headline numbers for each protocol, fixed decimal places. An empty result
// reports "no data" and ok = false.
Summary emit_summary(const ExperimentResult& result);

}  // namespace jbasim
