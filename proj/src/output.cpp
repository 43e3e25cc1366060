#include "jbasim/output.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "jbasim/fit.hpp"

namespace jbasim {

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);  // fixed newlines on every platform
  if (!out) throw std::runtime_error("cannot write output file: " + path);
  return out;
}

double scalar_or_nan(const ExperimentResult& r, const std::string& name) {
  for (const auto& [k, v] : r.scalars) {
    if (k == name) return v;
  }
  return std::numeric_limits<double>::quiet_NaN();
}

void fit_summary_lines(std::ostringstream& out, const std::vector<double>& x,
                       const Column& pb, const char* prefix) {
  const FitResult fit = fit_damped_sine(x, pb.values, pb.stderrs);
  char line[160];
  std::snprintf(line, sizeof(line), "%svisibility = %.3f ± %.3f\n", prefix,
                2.0 * fit.value("amplitude"), 2.0 * fit.stderr_of("amplitude"));
  out << line;
  std::snprintf(line, sizeof(line), "%sdecay_us = %.3f ± %.3f\n", prefix,
                fit.value("decay") * 1e-3, fit.stderr_of("decay") * 1e-3);
  out << line;
  std::snprintf(line, sizeof(line), "%sfrequency_mhz = %.2f ± %.2f\n", prefix,
                fit.value("frequency") * 1e3, fit.stderr_of("frequency") * 1e3);
  out << line;
}

}  // namespace

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

void write_results_csv(const std::string& path, const ExperimentResult& result) {
  std::ofstream out = open_out(path);
  out << result.x_name;
  for (const auto& col : result.columns) {
    out << "," << col.name;
    if (!col.stderrs.empty()) out << ",stderr_" << col.name;
  }
  out << "\n";
  for (std::size_t i = 0; i < result.x.size(); ++i) {
    out << format_number(result.x[i]);
    for (const auto& col : result.columns) {
      out << "," << format_number(col.values[i]);
      if (!col.stderrs.empty()) out << "," << format_number(col.stderrs[i]);
    }
    out << "\n";
  }
}

void write_long_csv(const std::string& path, const ExperimentResult& result) {
  std::ofstream out = open_out(path);
  out << "series," << result.x_name << ",value,stderr\n";
  for (const auto& col : result.columns) {
    for (std::size_t i = 0; i < result.x.size(); ++i) {
      out << col.name << "," << format_number(result.x[i]) << ","
          << format_number(col.values[i]) << ",";
      out << (col.stderrs.empty() ? "" : format_number(col.stderrs[i]));
      out << "\n";
    }
  }
}

std::string config_hash(const RunConfig& config) {
  // The destination directory is not part of the run's identity.
  RunConfig keyed = config;
  keyed.output_dir.clear();
  const std::string canonical = to_json(keyed).dump();
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : canonical) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  char out[20];
  std::snprintf(out, sizeof(out), "%016llx", static_cast<unsigned long long>(h));
  return out;
}

void write_metadata(const std::string& path, const RunConfig& config,
                    const ExperimentResult& result, const std::vector<std::string>& outputs) {
  nlohmann::json meta;
  meta["tool"] = "jbasim";
  meta["version"] = "1.0.0";
  meta["protocol"] = result.protocol;
  meta["seed"] = config.seed;
  meta["config_hash"] = config_hash(config);
  meta["device_hash"] = result.device_hash;
  meta["outputs"] = outputs;
  nlohmann::json scalars = nlohmann::json::object();
  for (const auto& [k, v] : result.scalars) {
    if (std::isfinite(v)) {
      scalars[k] = v;
    } else {
      scalars[k] = nullptr;
    }
  }
  meta["scalars"] = scalars;
  std::ofstream out = open_out(path);
  out << meta.dump(2) << "\n";
}

Summary emit_summary(const ExperimentResult& result) {
  Summary summary;
  if (result.x.empty() || result.columns.empty()) {
    summary.text = "no data\n";
    summary.ok = false;
    return summary;
  }

  std::ostringstream out;
  char line[200];
  try {
    if (result.protocol == "scurve") {
      const auto* s0 = &result.column("pb_state0");
      for (const char* name : {"pb_state1", "pb_state2"}) {
        bool have = false;
        for (const auto& c : result.columns) have |= (c.name == name);
        if (!have) continue;
        const auto& se = result.column(name);
        double best = -1.0, best_p = 0.0;
        for (std::size_t i = 0; i < result.x.size(); ++i) {
          const double d = se.values[i] - s0->values[i];
          if (d > best) {
            best = d;
            best_p = result.x[i];
          }
        }
        std::snprintf(line, sizeof(line), "contrast(0->%c) = %.3f at P_S = %.2f dB\n",
                      name[8], best, best_p);
        out << line;
      }
    } else if (result.protocol == "rabi" || result.protocol == "rabi_composite") {
      fit_summary_lines(out, result.x, result.column("p_b"), "");
    } else if (result.protocol == "ramsey") {
      const FitResult fit = fit_damped_sine(result.x, result.column("p_b").values,
                                            result.column("p_b").stderrs);
      const double t2_us = fit.value("decay") * 1e-3;
      std::snprintf(line, sizeof(line), "t2_us = %.3f ± %.3f\n", t2_us,
                    fit.stderr_of("decay") * 1e-3);
      out << line;
      std::snprintf(line, sizeof(line), "fringe_mhz = %.3f ± %.3f\n",
                    fit.value("frequency") * 1e3, fit.stderr_of("frequency") * 1e3);
      out << line;
      const double t1_us = scalar_or_nan(result, "t1_budget_us");
      if (std::isfinite(t1_us)) {
        const double tphi = extract_tphi(t1_us, std::min(t2_us, 2.0 * t1_us));
        if (std::isinf(tphi)) {
          out << "t_phi_us = inf (relaxation-limited)\n";
        } else {
          std::snprintf(line, sizeof(line), "t_phi_us = %.3f\n", tphi);
          out << line;
        }
      }
    } else if (result.protocol == "t1" || result.protocol == "t1_under_drive") {
      double t1_min = 1e300, t1_max = -1e300;
      for (const auto& col : result.columns) {
        if (col.name.rfind("p_b", 0) != 0) continue;
        const FitResult fit = fit_exponential(result.x, col.values, col.stderrs);
        if (fit.degenerate) {
          std::snprintf(line, sizeof(line), "t1_us[%s] = inf (no decay resolved)\n",
                        col.name.c_str());
          out << line;
          continue;
        }
        const double t1_us = fit.value("decay") * 1e-3;
        t1_min = std::min(t1_min, t1_us);
        t1_max = std::max(t1_max, t1_us);
        std::snprintf(line, sizeof(line), "t1_us[%s] = %.3f ± %.3f\n", col.name.c_str(),
                      t1_us, fit.stderr_of("decay") * 1e-3);
        out << line;
      }
      if (result.columns.size() > 1 && t1_max > 0.0) {
        std::snprintf(line, sizeof(line), "t1_spread_rel = %.3f\n",
                      (t1_max - t1_min) / (0.5 * (t1_max + t1_min)));
        out << line;
      }
    } else if (result.protocol == "two_readout") {
      fit_summary_lines(out, result.x, result.column("r1"), "r1_");
      fit_summary_lines(out, result.x, result.column("r2"), "r2_");
      fit_summary_lines(out, result.x, result.column("r3"), "r3_");
    } else if (result.protocol == "ac_stark") {
      const auto& n_bar = result.column("n_bar").values;
      double n_below = 0.0, n_above = 0.0;
      for (std::size_t i = 0; i + 1 < n_bar.size(); ++i) {
        if (n_bar[i + 1] > 3.0 * n_bar[i] && n_bar[i] > 1.0) {
          n_below = n_bar[i];
          n_above = n_bar[i + 1];
        }
      }
      std::snprintf(line, sizeof(line), "n_bar_below_jump = %.2f\n", n_below);
      out << line;
      std::snprintf(line, sizeof(line), "n_bar_above_jump = %.2f\n", n_above);
      out << line;
      std::snprintf(line, sizeof(line), "n_bar_max = %.2f\n",
                    *std::max_element(n_bar.begin(), n_bar.end()));
      out << line;
    } else if (result.protocol == "sweep_detuning") {
      const auto& c = result.column("contrast_composite").values;
      double best = -1.0, best_delta = 0.0;
      for (std::size_t i = 0; i < result.x.size(); ++i) {
        if (std::isfinite(c[i]) && c[i] > best) {
          best = c[i];
          best_delta = result.x[i];
        }
      }
      std::snprintf(line, sizeof(line), "max_contrast = %.3f at delta_ghz = %.3f\n", best,
                    best_delta);
      out << line;
    } else if (result.protocol == "shot_trace") {
      const auto& bif = result.column("bifurcated").values;
      long total = static_cast<long>(bif.size());
      long hits = 0;
      for (double b : bif) hits += b > 0.5;
      std::snprintf(line, sizeof(line), "bifurcated = %ld of %ld traces\n", hits, total);
      out << line;
    } else {
      out << "protocol = " << result.protocol << "\n";
    }
  } catch (const std::exception& e) {
    summary.text = std::string("summary failed: ") + e.what() + "\n";
    summary.ok = false;
    return summary;
  }

  summary.text = out.str();
  summary.ok = !summary.text.empty();
  if (summary.text.empty()) summary.text = "no data\n";
  return summary;
}

}  // namespace jbasim
