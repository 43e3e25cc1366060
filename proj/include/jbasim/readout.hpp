#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "jbasim/device.hpp"
#include "jbasim/jba.hpp"
#include "jbasim/rng.hpp"

namespace jbasim {

// Sample-and-hold readout pulse: linear power ramp over t_R, sampling plateau
// at P_S for t_S, reduced holding plateau at P_H for t_H. The envelope is
// piecewise linear in power.
struct ReadoutPulse {
  double f_drive = 0.0;  // GHz
  double p_s_db = 0.0;   // sampling power (dB at fridge input)
  double p_h_db = 0.0;   // holding power
  double t_r_ns = 15.0;
  double t_s_ns = 250.0;
  double t_h_ns = 700.0;
  double dt_ns = 0.5;    // hazard integration step

  void validate() const;
  double total_ns() const { return t_r_ns + t_s_ns + t_h_ns; }
  // Envelope in linear power units (mW at the fridge input).
  double power_mw_at(double t_ns) const;
};

// State-preparation imperfections (both toggleable by zeroing).
struct PrepModel {
  double thermal_pop = 0.01;  // residual |1> population before any pulse
  double pulse_error = 0.01;  // transfer error per pi pulse
};

// Populations after preparing |target> from thermal equilibrium with imperfect
// pi pulses; shelve appends the 1->2 transfer pulse of the composite readout.
std::array<double, 3> prepare_populations(int target, const PrepModel& prep, bool shelve);

struct Jump {
  double t_ns;
  int from;
  int to;
};

struct ShotRecord {
  int prepared = 0;       // requested level
  int initial = 0;        // level actually entering the readout pulse
  int final_state = 0;    // level at the end of the pulse
  std::vector<Jump> jumps;
  bool bifurcated = false;
  double bif_time_ns = -1.0;  // in [0, t_R + t_S] when bifurcated
  std::uint64_t stream_key = 0;
};

// Everything a shot needs: device, dressed map, escape model, cascade rates.
struct ReadoutSetup {
  DeviceParams dev;
  DispersiveMap map;
  EscapeModel escape;
  CoherenceBudget budget;
  PrepModel prep;
  ReadoutPulse pulse;
  double f12_ghz = 0.0;  // shelving-pulse frequency

  JbaOperatingPoint point_for_state(int state) const {
    return JbaOperatingPoint::from_device(dev, map.f_ci[state], pulse.f_drive);
  }
};

// Per-state escape hazard on the integration grid (rise + sampling only; the
// hold phase sits inside the hysteresis window and never escapes).
struct HazardTable {
  double dt_ns = 0.5;
  int active_steps = 0;                          // steps with nonzero hazard
  int total_steps = 0;                           // full pulse
  std::array<std::vector<double>, 3> rate_ns;    // per state, per step (1/ns)
};

HazardTable build_hazard_table(const ReadoutSetup& setup, double p_s_db);

// Fixed-grid competing-hazards walk through one readout pulse from a known
// initial level. Latches on bifurcation; the qubit keeps cascading downward
// for the whole pulse. Decay rates do not depend on the drive.
ShotRecord simulate_shot_from(const ReadoutSetup& setup, const HazardTable& table,
                              int initial_state, Rng& rng);

// Spec-level entry: prepares |prepared> (with the setup's error model), then
// runs the pulse. Identical (inputs, seed) give identical records.
ShotRecord simulate_shot(const ReadoutSetup& setup, int prepared, std::uint64_t seed);

// Monte-Carlo S-curve with binomial standard errors. Shots parallelize over
// threads; every shot owns the substream (seed, stream_tag, point index,
// shot index), so results are independent of the thread count.
SCurveModel run_scurve_mc(const ReadoutSetup& setup, int prepared, bool shelve,
                          const std::vector<double>& p_grid_db, long shots_per_point,
                          std::uint64_t seed, std::uint64_t stream_tag);

// One-power shot batch, keeping the bifurcation-time statistics.
struct ShotBatch {
  long shots = 0;
  long bifurcated = 0;
  double p_b = 0.0;
  double stderr_pb = 0.0;
  double median_bif_time_ns = -1.0;  // over bifurcated shots
};

ShotBatch run_shots_at(const ReadoutSetup& setup, int prepared, bool shelve, double p_s_db,
                       long shots, std::uint64_t seed, std::uint64_t stream_tag);

// Amplifier chain referred to a single noise temperature plus the digitizer
// low-pass filter.
struct NoiseChain {
  double t_n = 3.0;            // K
  double lpf_cutoff_mhz = 10.0;
  double dt_ns = 1.0;          // sample period
};

struct HomodyneTrace {
  std::vector<double> t_ns;
  std::vector<double> i;  // units of the plateau separation
  std::vector<double> q;
};

// Synthesizes the reflected I/Q record of one shot: steady-state plateau
// levels of the occupied branch at the hold power, a first-order 2/kappa
// step at the bifurcation time, white noise set by the referred noise
// temperature, then a single-pole low-pass.
HomodyneTrace homodyne_trace(const ShotRecord& shot, const ReadoutSetup& setup,
                             const NoiseChain& noise, std::uint64_t seed);

struct Discrimination {
  bool is_b = false;   // bifurcated-state verdict
  double margin = 0.0; // |mean - threshold| in sigma-of-mean units
};

Discrimination discriminate(const std::vector<double>& trace_i, double dt_ns,
                            double window_start_ns, double window_end_ns, double threshold);

// Rabi population model used by the protocol layer: ideal rotation damped by
// a single envelope time constant, riding on the residual thermal population.
double rabi_excited_population(double dt_ns, double f_rabi_mhz, double decay_us,
                               double thermal_pop);

struct TwoReadoutResult {
  std::vector<double> dt_ns;
  std::vector<double> r1, r2, r3;
  std::vector<double> err1, err2, err3;
};

// Back-action protocol: Rabi pulse, then either two successive readout pulses
// separated by `delay` (R1, R2) or the second pulse alone after an equivalent
// idle (R3). The resonator resets during the delay; the qubit keeps decaying.
TwoReadoutResult two_readout_run(const ReadoutSetup& setup1, const ReadoutPulse& pulse2,
                                 double delay_ns, double f_rabi_mhz, double rabi_decay_us,
                                 const std::vector<double>& dt_grid_ns, long shots,
                                 std::uint64_t seed);

// Thread count for shot-level parallelism; SIM_THREADS overrides, results
// never depend on it.
int thread_count();

}  // namespace jbasim
