#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "jbasim/jba.hpp"
#include "jbasim/readout.hpp"

#include "json.hpp"

namespace jbasim {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Operating point and pulse timing shared by every experiment. Sampling power
// is specified relative to the state-1 bifurcation threshold so configs stay
// valid when device parameters move.
struct ReadoutBlock {
  double delta_ghz = 0.38;     // qubit-cavity detuning f_C - f01
  double f_offset_mhz = 17.0;  // bare readout offset f_C - f
  double t_r_ns = 15.0;
  double t_s_ns = 250.0;
  double t_h_ns = 700.0;
  double dt_ns = 0.5;
  double p_s_rel_db = 0.3;     // sampling power above the state-1 threshold
  double hold_offset_db = -3.0;
  int n_photons_max = 40;
};

struct ScurveExperiment {
  std::vector<int> states{0, 1, 2};
  double p_min_rel_db = -4.0;  // grid around the state-1 threshold
  double p_max_rel_db = 3.0;
  double p_step_db = 0.25;
};

struct RabiExperiment {
  double f_rabi_mhz = 29.0;
  double rabi_decay_us = 0.5;
  double dt_min_ns = 0.0;
  double dt_max_ns = 1000.0;
  double dt_step_ns = 8.0;
  bool composite = true;
};

struct RamseyExperiment {
  double detuning_mhz = 4.0;
  double delay_min_ns = 0.0;
  double delay_max_ns = 2000.0;
  double delay_step_ns = 25.0;
};

struct T1Experiment {
  double delay_min_ns = 0.0;
  double delay_max_ns = 2200.0;
  double delay_step_ns = 100.0;
  // Optional auxiliary-drive powers (relative to the state-0 threshold) for
  // the relaxation-under-drive scan; empty means a single undriven run.
  std::vector<double> drive_powers_rel_db;
};

struct TwoReadoutExperiment {
  double pulse1_t_r_ns = 10.0;
  double pulse1_t_s_ns = 40.0;
  double pulse1_t_h_ns = 50.0;
  double pulse2_t_r_ns = 10.0;
  double pulse2_t_s_ns = 40.0;
  double pulse2_t_h_ns = 50.0;
  double delay_ns = 120.0;
  double f_rabi_mhz = 29.0;
  double rabi_decay_us = 0.5;
  double dt_min_ns = 0.0;
  double dt_max_ns = 140.0;
  double dt_step_ns = 2.0;
};

struct AcStarkExperiment {
  double p_min_rel_db = -15.0;  // around the state-0 threshold
  double p_max_rel_db = 12.0;
  double p_step_db = 0.25;
  int n_photons_max = 130;
};

struct SweepDetuningExperiment {
  double delta_min_ghz = 0.20;
  double delta_max_ghz = 0.60;
  double delta_step_ghz = 0.05;
  long shots_optimize = 2000;
  long shots_scurve = 2000;
};

struct ShotTraceExperiment {
  long count = 2;
  std::vector<int> prepared{0, 1};
  double t_n = 3.0;
  double lpf_cutoff_mhz = 10.0;
  double trace_dt_ns = 1.0;
};

using Experiment = std::variant<ScurveExperiment, RabiExperiment, RamseyExperiment,
                                T1Experiment, TwoReadoutExperiment, AcStarkExperiment,
                                SweepDetuningExperiment, ShotTraceExperiment>;

const char* experiment_name(const Experiment& e);
std::vector<std::string> known_experiments();

struct RunConfig {
  DeviceParams device;
  EscapeModel escape;
  PrepModel prep;
  ReadoutBlock readout;
  Experiment experiment;
  std::uint64_t seed = 0;
  long shots = 10000;
  std::string output_dir = "out";
};

// Strict parse: unknown keys are rejected with their JSON-pointer paths, all
// invariants are validated, and the seed is mandatory.
RunConfig parse_config(const nlohmann::json& doc);
RunConfig load_config(const std::string& path);

// Full round-trip serialization (every field explicit).
nlohmann::json to_json(const RunConfig& config);

}  // namespace jbasim
