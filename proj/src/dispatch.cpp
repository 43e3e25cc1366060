#include "jbasim/dispatch.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "jbasim/output.hpp"

namespace jbasim {

namespace {

namespace fs = std::filesystem;

std::vector<double> make_grid(double lo, double hi, double step) {
  std::vector<double> grid;
  const long n = static_cast<long>(std::floor((hi - lo) / step + 1e-9));
  for (long k = 0; k <= n; ++k) grid.push_back(lo + k * step);
  return grid;
}

ReadoutSetup setup_from(const RunConfig& config, int n_photons_override = 0) {
  const ReadoutBlock& r = config.readout;
  ReadoutPulse timing;
  timing.t_r_ns = r.t_r_ns;
  timing.t_s_ns = r.t_s_ns;
  timing.t_h_ns = r.t_h_ns;
  timing.dt_ns = r.dt_ns;

  ReadoutSetup setup = make_setup(config.device, r.delta_ghz, r.f_offset_mhz, timing,
                                  n_photons_override > 0 ? n_photons_override : r.n_photons_max);
  setup.escape = config.escape;
  setup.prep = config.prep;
  const double thr1 = threshold_power(setup.point_for_state(1), config.device);
  setup.pulse.p_s_db = thr1 + r.p_s_rel_db;
  setup.pulse.p_h_db = setup.pulse.p_s_db + r.hold_offset_db;
  return setup;
}

ExperimentResult run_scurve_experiment(const RunConfig& config, const ScurveExperiment& exp) {
  const ReadoutSetup setup = setup_from(config);
  const double thr1 = threshold_power(setup.point_for_state(1), config.device);
  const auto grid = make_grid(thr1 + exp.p_min_rel_db, thr1 + exp.p_max_rel_db, exp.p_step_db);

  ExperimentResult res;
  res.protocol = "scurve";
  res.x_name = "p_db";
  res.x = grid;
  res.seed = config.seed;
  res.device_hash = device_hash(config.device);

  for (int state : exp.states) {
    const auto curve = run_scurve_mc(setup, state, false, grid, config.shots, config.seed,
                                     static_cast<std::uint64_t>(state));
    Column col{"pb_state" + std::to_string(state), curve.p_b, curve.stderr_pb};
    res.columns.push_back(std::move(col));
  }
  res.columns.push_back(
      Column{"n_shots", std::vector<double>(grid.size(), static_cast<double>(config.shots)), {}});

  // Headline contrasts against the ground-state curve.
  const Column* s0 = nullptr;
  for (const auto& c : res.columns) {
    if (c.name == "pb_state0") s0 = &c;
  }
  if (s0 != nullptr) {
    for (const auto& c : res.columns) {
      if (&c == s0) continue;
      double best = 0.0;
      for (std::size_t i = 0; i < grid.size(); ++i) {
        best = std::max(best, c.values[i] - s0->values[i]);
      }
      res.scalars.emplace_back("contrast_" + c.name.substr(3), best);
    }
  }
  res.scalars.emplace_back("threshold_state1_db", thr1);
  res.scalars.emplace_back("pull_01_mhz", setup.map.pull_01_mhz);
  return res;
}

ExperimentResult run_rabi_experiment(const RunConfig& config, const RabiExperiment& exp) {
  const ReadoutSetup setup = setup_from(config);
  const auto grid = make_grid(exp.dt_min_ns, exp.dt_max_ns, exp.dt_step_ns);
  ExperimentResult res = run_rabi(setup, exp.f_rabi_mhz, exp.rabi_decay_us, grid, config.shots,
                                  exp.composite, config.seed);
  res.scalars.emplace_back("t1_budget_us", setup.budget.t1_us);
  res.scalars.emplace_back("pull_01_mhz", setup.map.pull_01_mhz);
  return res;
}

ExperimentResult run_ramsey_experiment(const RunConfig& config, const RamseyExperiment& exp) {
  const ReadoutSetup setup = setup_from(config);
  const auto grid = make_grid(exp.delay_min_ns, exp.delay_max_ns, exp.delay_step_ns);
  ExperimentResult res = run_ramsey(setup, exp.detuning_mhz, grid, config.shots, config.seed);
  res.scalars.emplace_back("t1_budget_us", setup.budget.t1_us);
  res.scalars.emplace_back("t2_budget_us", setup.budget.t2_us);
  res.scalars.emplace_back("t_phi_budget_us", setup.budget.t_phi_us);
  return res;
}

ExperimentResult run_t1_experiment(const RunConfig& config, const T1Experiment& exp) {
  const ReadoutSetup setup = setup_from(config);
  const auto grid = make_grid(exp.delay_min_ns, exp.delay_max_ns, exp.delay_step_ns);

  if (exp.drive_powers_rel_db.empty()) {
    ExperimentResult res = run_t1(setup, grid, config.shots, config.seed);
    res.scalars.emplace_back("t1_budget_us", setup.budget.t1_us);
    return res;
  }

  // Relaxation in the presence of an auxiliary drive at each listed power.
  // Decay rates are drive-independent in this model (the measured property
  // this simulator encodes), so only the shot noise differs between powers.
  ExperimentResult res;
  res.protocol = "t1_under_drive";
  res.x_name = "delay_ns";
  res.x = grid;
  res.seed = config.seed;
  res.device_hash = device_hash(config.device);
  const double thr0 = threshold_power(setup.point_for_state(0), config.device);
  for (std::size_t pi = 0; pi < exp.drive_powers_rel_db.size(); ++pi) {
    const double aux_db = thr0 + exp.drive_powers_rel_db[pi];
    const std::uint64_t sub_seed = derive_stream_key(config.seed, {0x71D21ULL, pi});
    ExperimentResult one = run_t1(setup, grid, config.shots, sub_seed);
    char name[48];
    std::snprintf(name, sizeof(name), "p_b_drive%+.1fdB", exp.drive_powers_rel_db[pi]);
    res.columns.push_back(Column{name, one.column("p_b").values, one.column("p_b").stderrs});
    (void)aux_db;
  }
  res.scalars.emplace_back("t1_budget_us", setup.budget.t1_us);
  return res;
}

ExperimentResult run_two_readout_experiment(const RunConfig& config,
                                            const TwoReadoutExperiment& exp) {
  ReadoutSetup setup = setup_from(config);
  setup.pulse.t_r_ns = exp.pulse1_t_r_ns;
  setup.pulse.t_s_ns = exp.pulse1_t_s_ns;
  setup.pulse.t_h_ns = exp.pulse1_t_h_ns;
  const double thr1 = threshold_power(setup.point_for_state(1), config.device);
  setup.pulse.p_s_db = thr1 + config.readout.p_s_rel_db;
  setup.pulse.p_h_db = setup.pulse.p_s_db + config.readout.hold_offset_db;

  ReadoutPulse pulse2 = setup.pulse;
  pulse2.t_r_ns = exp.pulse2_t_r_ns;
  pulse2.t_s_ns = exp.pulse2_t_s_ns;
  pulse2.t_h_ns = exp.pulse2_t_h_ns;

  const auto grid = make_grid(exp.dt_min_ns, exp.dt_max_ns, exp.dt_step_ns);
  const TwoReadoutResult two = two_readout_run(setup, pulse2, exp.delay_ns, exp.f_rabi_mhz,
                                               exp.rabi_decay_us, grid, config.shots,
                                               config.seed);

  ExperimentResult res;
  res.protocol = "two_readout";
  res.x_name = "dt_ns";
  res.x = two.dt_ns;
  res.seed = config.seed;
  res.device_hash = device_hash(config.device);
  res.columns.push_back(Column{"r1", two.r1, two.err1});
  res.columns.push_back(Column{"r2", two.r2, two.err2});
  res.columns.push_back(Column{"r3", two.r3, two.err3});
  res.scalars.emplace_back("t1_budget_us", setup.budget.t1_us);
  return res;
}

ExperimentResult run_ac_stark_experiment(const RunConfig& config, const AcStarkExperiment& exp) {
  const ReadoutSetup setup = setup_from(config, exp.n_photons_max);
  const double thr0 = threshold_power(setup.point_for_state(0), config.device);
  const auto grid = make_grid(thr0 + exp.p_min_rel_db, thr0 + exp.p_max_rel_db, exp.p_step_db);
  ExperimentResult res = run_ac_stark(setup, grid);
  res.seed = config.seed;
  res.scalars.emplace_back("threshold_state0_db", thr0);
  return res;
}

ExperimentResult run_sweep_experiment(const RunConfig& config,
                                      const SweepDetuningExperiment& exp) {
  const auto grid = make_grid(exp.delta_min_ghz, exp.delta_max_ghz, exp.delta_step_ghz);
  ReadoutPulse timing;
  timing.t_r_ns = config.readout.t_r_ns;
  timing.t_s_ns = config.readout.t_s_ns;
  timing.t_h_ns = config.readout.t_h_ns;
  timing.dt_ns = config.readout.dt_ns;
  DetuningPointConfig cfg;
  cfg.shots_optimize = exp.shots_optimize;
  cfg.shots_scurve = exp.shots_scurve;
  return contrast_vs_detuning(config.device, grid, timing, config.escape, config.prep, cfg,
                              config.seed);
}

ExperimentResult run_shot_trace_experiment(const RunConfig& config,
                                           const ShotTraceExperiment& exp,
                                           const fs::path& trace_dir,
                                           std::vector<std::string>& outputs) {
  const ReadoutSetup setup = setup_from(config);
  NoiseChain noise;
  noise.t_n = exp.t_n;
  noise.lpf_cutoff_mhz = exp.lpf_cutoff_mhz;
  noise.dt_ns = exp.trace_dt_ns;

  fs::create_directories(trace_dir);

  ExperimentResult res;
  res.protocol = "shot_trace";
  res.x_name = "shot";
  res.seed = config.seed;
  res.device_hash = device_hash(config.device);
  Column prepared{"prepared", {}, {}};
  Column initial{"initial", {}, {}};
  Column bifurcated{"bifurcated", {}, {}};
  Column bif_time{"bif_time_ns", {}, {}};
  Column verdict{"verdict_b", {}, {}};
  Column margin{"margin", {}, {}};

  const double window_start = setup.pulse.t_r_ns + setup.pulse.t_s_ns + 50.0;
  const double window_end = setup.pulse.total_ns();
  long index = 0;
  for (int state : exp.prepared) {
    for (long k = 0; k < exp.count; ++k, ++index) {
      const std::uint64_t shot_seed =
          derive_stream_key(config.seed, {0x712ACEULL, static_cast<std::uint64_t>(state),
                                          static_cast<std::uint64_t>(k)});
      const ShotRecord shot = simulate_shot(setup, state, shot_seed);
      const HomodyneTrace trace = homodyne_trace(shot, setup, noise, shot_seed);
      const Discrimination d =
          discriminate(trace.i, noise.dt_ns, window_start, window_end, 0.5);

      char name[64];
      std::snprintf(name, sizeof(name), "trace_state%d_%03ld.csv", state, k);
      const fs::path path = trace_dir / name;
      {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write trace file: " + path.string());
        out << "t_ns,I,Q\n";
        for (std::size_t i = 0; i < trace.t_ns.size(); ++i) {
          out << format_number(trace.t_ns[i]) << "," << format_number(trace.i[i]) << ","
              << format_number(trace.q[i]) << "\n";
        }
      }
      outputs.push_back(std::string("traces/") + name);

      res.x.push_back(static_cast<double>(index));
      prepared.values.push_back(state);
      initial.values.push_back(shot.initial);
      bifurcated.values.push_back(shot.bifurcated ? 1.0 : 0.0);
      bif_time.values.push_back(shot.bif_time_ns);
      verdict.values.push_back(d.is_b ? 1.0 : 0.0);
      margin.values.push_back(d.margin);
    }
  }
  res.columns = {std::move(prepared), std::move(initial), std::move(bifurcated),
                 std::move(bif_time), std::move(verdict), std::move(margin)};
  return res;
}

}  // namespace

DispatchOutcome dispatch(const RunConfig& config, std::ostream& log) {
  DispatchOutcome outcome;
  const fs::path out_dir(config.output_dir);
  fs::create_directories(out_dir);

  ExperimentResult result;
  result = std::visit(
      [&](const auto& exp) -> ExperimentResult {
        using T = std::decay_t<decltype(exp)>;
        if constexpr (std::is_same_v<T, ScurveExperiment>) {
          return run_scurve_experiment(config, exp);
        } else if constexpr (std::is_same_v<T, RabiExperiment>) {
          return run_rabi_experiment(config, exp);
        } else if constexpr (std::is_same_v<T, RamseyExperiment>) {
          return run_ramsey_experiment(config, exp);
        } else if constexpr (std::is_same_v<T, T1Experiment>) {
          return run_t1_experiment(config, exp);
        } else if constexpr (std::is_same_v<T, TwoReadoutExperiment>) {
          return run_two_readout_experiment(config, exp);
        } else if constexpr (std::is_same_v<T, AcStarkExperiment>) {
          return run_ac_stark_experiment(config, exp);
        } else if constexpr (std::is_same_v<T, SweepDetuningExperiment>) {
          return run_sweep_experiment(config, exp);
        } else {
          return run_shot_trace_experiment(config, std::get<ShotTraceExperiment>(config.experiment),
                                           out_dir / "traces", outcome.outputs);
        }
      },
      config.experiment);

  write_results_csv((out_dir / "results.csv").string(), result);
  outcome.outputs.insert(outcome.outputs.begin(), "results.csv");
  write_long_csv((out_dir / "results_long.csv").string(), result);
  outcome.outputs.insert(outcome.outputs.begin() + 1, "results_long.csv");

  const Summary summary = emit_summary(result);
  outcome.summary = summary.text;
  log << summary.text;

  write_metadata((out_dir / "metadata.json").string(), config, result, outcome.outputs);
  outcome.outputs.push_back("metadata.json");

  // Per-point fatal errors (NaN rows) surface as a nonzero exit.
  bool any_nan = false;
  for (const auto& col : result.columns) {
    for (double v : col.values) any_nan |= std::isnan(v) && result.protocol == "sweep_detuning";
  }
  if (!summary.ok) {
    outcome.exit_code = 2;
  } else if (any_nan) {
    log << "warning: sweep points failed (NaN rows in results.csv)\n";
    outcome.exit_code = 3;
  }
  return outcome;
}

}  // namespace jbasim
