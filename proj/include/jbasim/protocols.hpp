#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "jbasim/fit.hpp"
#include "jbasim/readout.hpp"

namespace jbasim {

struct PulseSegment {
  enum class Kind { control, readout };
  enum class Envelope { square, gaussian };
  Kind kind = Kind::control;
  double frequency_ghz = 0.0;
  double amplitude = 0.0;  // power (dB) for readout, rotation angle (rad) for control
  Envelope envelope = Envelope::square;
  double start_ns = 0.0;
  double duration_ns = 0.0;
};

struct PulseSequence {
  std::vector<PulseSegment> segments;
  // Same-kind segments must not overlap and every control pulse must end
  // before the first readout segment starts.
  void validate() const;
  double readout_start_ns() const;
};

// Measurement pulse optionally preceded by the pi pulse at f12 that shelves
// |1> into |2>.
PulseSequence build_composite_readout(bool shelve, const ReadoutSetup& setup,
                                      double t_pi_ns = 20.0);

struct Column {
  std::string name;
  std::vector<double> values;
  std::vector<double> stderrs;  // empty when not applicable
};

struct ExperimentResult {
  std::string protocol;
  std::string x_name;
  std::vector<double> x;
  std::vector<Column> columns;
  std::vector<std::pair<std::string, double>> scalars;  // headline context values
  std::uint64_t seed = 0;
  std::string device_hash;

  const Column& column(const std::string& name) const;
};

// Canonical fingerprint of the device block, for result metadata.
std::string device_hash(const DeviceParams& dev);

// Assembles a ReadoutSetup at a detuning: tunes the flux, dresses the system,
// derives the coherence budget (including the flux-noise T_phi), and centers
// the pulse near the state-1 bifurcation threshold. f_offset_mhz is the bare
// f_C - f readout offset.
ReadoutSetup make_setup(const DeviceParams& dev, double delta_ghz, double f_offset_mhz,
                        const ReadoutPulse& timing, int n_photons_max = 40);

// Rabi oscillations read out through the (optionally composite) pulse.
ExperimentResult run_rabi(const ReadoutSetup& setup, double f_rabi_mhz, double rabi_decay_us,
                          const std::vector<double>& dt_grid_ns, long shots, bool composite,
                          std::uint64_t seed);

// Relaxation: pi pulse, variable delay, readout. Returns p_B(delay).
ExperimentResult run_t1(const ReadoutSetup& setup, const std::vector<double>& delay_grid_ns,
                        long shots, std::uint64_t seed);

// Ramsey fringes at a deliberate drive detuning; the fringe decays with the
// budget's T2.
ExperimentResult run_ramsey(const ReadoutSetup& setup, double detuning_mhz,
                            const std::vector<double>& delay_grid_ns, long shots,
                            std::uint64_t seed);

struct DecomposeResult {
  double weight = 0.0;  // fraction of the shifted reference in the target
  bool clipped = false;
};

// Least-squares weight w minimizing || target - [w shifted + (1-w) base] ||
// over the common power grid, clipped to [0, 1].
DecomposeResult scurve_decompose(const SCurveModel& target, const SCurveModel& base,
                                 const SCurveModel& base_shifted);

// Frequency shift that makes the generated reference S-curve coincide with
// the target at low bifurcation probability (p_B < 0.3); scalar golden-section
// search. The generator maps a shift in MHz to a curve on the target's grid.
double scurve_shift_match(const SCurveModel& target,
                          const std::function<SCurveModel(double)>& generator_at_shift,
                          double max_shift_mhz = 12.0);

// AC-Stark calibration: intracavity photon number along the hysteretic
// up-sweep and the correspondingly shifted qubit frequency. Columns: n_bar,
// f01_ghz, n_bar_inverted.
ExperimentResult run_ac_stark(const ReadoutSetup& setup, const std::vector<double>& p_grid_db);

struct DetuningPointConfig {
  double f_rabi_mhz = 29.0;
  double rabi_decay_us = 0.5;
  long shots_optimize = 2000;   // per curve per power probe
  long shots_scurve = 2000;     // per point of the S1 curve for the shift match
  double golden_tol_db = 0.05;
};

// Full trade-off sweep: per detuning retune the flux, rebuild the dressed
// map and budget, optimize the sampling power for composite contrast, and
// record contrast, effective pull, T1 and T_phi. Per-point failures yield
// NaN rows and the sweep continues.
ExperimentResult contrast_vs_detuning(const DeviceParams& dev,
                                      const std::vector<double>& delta_grid_ghz,
                                      const ReadoutPulse& timing, const EscapeModel& escape,
                                      const PrepModel& prep, const DetuningPointConfig& cfg,
                                      std::uint64_t seed);

// Golden-section maximizer used for the per-point power optimization.
double golden_section_max(const std::function<double(double)>& f, double lo, double hi,
                          double tol);

}  // namespace jbasim
