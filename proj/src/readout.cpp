#include "jbasim/readout.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <limits>
#include <sstream>
#include <thread>

#include "jbasim/constants.hpp"

namespace jbasim {

namespace {

// Shared barrier kernel; escape_rate in jba.cpp applies the same law through
// the spinodal lookup.
double hazard_hz(const EscapeModel& m, double eps2, double eps2_up) {
  const double x = eps2 / eps2_up;
  if (x >= 1.0) return m.attempt_rate_hz;
  return m.attempt_rate_hz * std::exp(-m.barrier_scale * std::pow(1.0 - x, EscapeModel::kExponent));
}

template <class Fn>
void parallel_chunks(long n, const Fn& fn) {
  const int threads = thread_count();
  if (threads <= 1 || n < 256) {
    fn(0L, n);
    return;
  }
  const long chunk = (n + threads - 1) / threads;
  std::vector<std::thread> pool;
  for (int i = 0; i < threads; ++i) {
    const long b = i * chunk;
    const long e = std::min(n, b + chunk);
    if (b >= e) break;
    pool.emplace_back([&fn, b, e] { fn(b, e); });
  }
  for (auto& t : pool) t.join();
}

int sample_level(const std::array<double, 3>& pops, Rng& rng) {
  const double u = rng.uniform();
  if (u < pops[0]) return 0;
  if (u < pops[0] + pops[1]) return 1;
  return 2;
}

// Free cascade decay over an idle span with no drive present.
int decay_through(int state, double span_ns, const CoherenceBudget& budget, Rng& rng) {
  double left = span_ns;
  while (state > 0 && left > 0.0) {
    const double rate_ns = (state == 2 ? budget.rate_21 : budget.rate_10) * 1e-3;
    if (rate_ns <= 0.0) break;
    const double wait = rng.exponential(rate_ns);
    if (wait >= left) break;
    left -= wait;
    --state;
  }
  return state;
}

}  // namespace

int thread_count() {
  if (const char* env = std::getenv("SIM_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && v >= 1 && v <= 64) return static_cast<int>(v);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return static_cast<int>(std::clamp(hw, 1u, 8u));
}

void ReadoutPulse::validate() const {
  if (!(f_drive > 0)) throw std::invalid_argument("ReadoutPulse.f_drive: must be > 0");
  if (t_r_ns < 0 || t_s_ns < 0 || t_h_ns < 0) {
    throw std::invalid_argument("ReadoutPulse: segment durations must be >= 0");
  }
  if (!(dt_ns > 0)) throw std::invalid_argument("ReadoutPulse.dt_ns: must be > 0");
  if (p_h_db > p_s_db) {
    throw std::invalid_argument("ReadoutPulse: holding power must not exceed sampling power");
  }
}

double ReadoutPulse::power_mw_at(double t_ns) const {
  if (t_ns < 0.0) return 0.0;
  if (t_ns < t_r_ns) return db_to_mw(p_s_db) * (t_ns / t_r_ns);
  if (t_ns < t_r_ns + t_s_ns) return db_to_mw(p_s_db);
  if (t_ns <= total_ns()) return db_to_mw(p_h_db);
  return 0.0;
}

std::array<double, 3> prepare_populations(int target, const PrepModel& prep, bool shelve) {
  if (target < 0 || target > 2) throw std::invalid_argument("prepare_populations: level must be 0, 1 or 2");
  const double e = prep.pulse_error;
  std::array<double, 3> p{1.0 - prep.thermal_pop, prep.thermal_pop, 0.0};

  auto pi01 = [&] {
    const double p0 = p[0], p1 = p[1];
    p[0] = e * p0 + (1.0 - e) * p1;
    p[1] = (1.0 - e) * p0 + e * p1;
  };
  // The f12 pulse also lifts |0> into |1> with ~1% probability (off-resonant
  // excitation seen in the measured dotted S-curve).
  auto pi12 = [&] {
    const double p0 = p[0], p1 = p[1], p2 = p[2];
    p[0] = (1.0 - e) * p0;
    p[1] = e * p0 + e * p1 + (1.0 - e) * p2;
    p[2] = (1.0 - e) * p1 + e * p2;
  };

  if (target >= 1) pi01();
  if (target >= 2) pi12();
  if (shelve) pi12();
  return p;
}

HazardTable build_hazard_table(const ReadoutSetup& setup, double p_s_db) {
  ReadoutPulse pulse = setup.pulse;
  const double hold_offset = setup.pulse.p_h_db - setup.pulse.p_s_db;
  pulse.p_s_db = p_s_db;
  pulse.p_h_db = p_s_db + hold_offset;
  pulse.validate();

  HazardTable table;
  table.dt_ns = pulse.dt_ns;
  table.active_steps = static_cast<int>(std::ceil((pulse.t_r_ns + pulse.t_s_ns) / pulse.dt_ns));
  table.total_steps = static_cast<int>(std::ceil(pulse.total_ns() / pulse.dt_ns));

  const double eps_s = drive_from_power(pulse.p_s_db, setup.dev, pulse.f_drive);
  const double p_mw_s = db_to_mw(pulse.p_s_db);

  for (int state = 0; state < 3; ++state) {
    auto& rates = table.rate_ns[state];
    const JbaOperatingPoint point = setup.point_for_state(state);
    if (!point.bistable()) {
      // No bistable window for this state at this drive frequency: the
      // response is single-valued and nothing latches.
      rates.assign(table.active_steps, 0.0);
      continue;
    }
    const double eps2_up = spinodals(point).eps2_up;
    rates.resize(table.active_steps);
    for (int k = 0; k < table.active_steps; ++k) {
      const double t_mid = (k + 0.5) * pulse.dt_ns;
      const double eps2 = eps_s * eps_s * (pulse.power_mw_at(t_mid) / p_mw_s);
      rates[k] = hazard_hz(setup.escape, eps2, eps2_up) * 1e-9;
    }
  }
  return table;
}

ShotRecord simulate_shot_from(const ReadoutSetup& setup, const HazardTable& table,
                              int initial_state, Rng& rng) {
  ShotRecord rec;
  rec.prepared = initial_state;
  rec.initial = initial_state;

  const double dt = table.dt_ns;
  const double hazard_window_ns = setup.pulse.t_r_ns + setup.pulse.t_s_ns;
  const double rate21_ns = setup.budget.rate_21 * 1e-3;
  const double rate10_ns = setup.budget.rate_10 * 1e-3;

  int state = initial_state;
  for (int k = 0; k < table.total_steps; ++k) {
    if (!rec.bifurcated && k < table.active_steps) {
      const double g_ns = table.rate_ns[state][k];
      if (g_ns > 0.0 && rng.uniform() < -std::expm1(-g_ns * dt)) {
        rec.bifurcated = true;  // latches for the rest of the shot
        rec.bif_time_ns = std::min((k + 1) * dt, hazard_window_ns);
      }
    }
    const double rate_ns = state == 2 ? rate21_ns : state == 1 ? rate10_ns : 0.0;
    if (rate_ns > 0.0 && rng.uniform() < -std::expm1(-rate_ns * dt)) {
      const double t_jump = std::min((k + 1) * dt, setup.pulse.total_ns());
      rec.jumps.push_back({t_jump, state, state - 1});
      --state;
    }
  }
  rec.final_state = state;
  return rec;
}

ShotRecord simulate_shot(const ReadoutSetup& setup, int prepared, std::uint64_t seed) {
  const HazardTable table = build_hazard_table(setup, setup.pulse.p_s_db);
  Rng rng(seed, {0x51071ULL, static_cast<std::uint64_t>(prepared)});
  const auto pops = prepare_populations(prepared, setup.prep, false);
  ShotRecord rec = simulate_shot_from(setup, table, sample_level(pops, rng), rng);
  rec.prepared = prepared;
  rec.stream_key = derive_stream_key(seed, {0x51071ULL, static_cast<std::uint64_t>(prepared)});
  return rec;
}

namespace {

ShotBatch batch_at_power(const ReadoutSetup& setup, const std::array<double, 3>& pops,
                         double p_s_db, long shots, std::uint64_t seed, std::uint64_t stream_tag,
                         std::uint64_t point_idx, bool keep_times) {
  const HazardTable table = build_hazard_table(setup, p_s_db);
  std::vector<double> bif_times;
  if (keep_times) bif_times.assign(shots, -1.0);
  std::vector<std::uint8_t> outcomes(shots, 0);

  parallel_chunks(shots, [&](long begin, long end) {
    for (long shot = begin; shot < end; ++shot) {
      Rng rng(seed, {stream_tag, point_idx, static_cast<std::uint64_t>(shot)});
      const int initial = sample_level(pops, rng);
      const ShotRecord rec = simulate_shot_from(setup, table, initial, rng);
      outcomes[shot] = rec.bifurcated ? 1 : 0;
      if (keep_times && rec.bifurcated) bif_times[shot] = rec.bif_time_ns;
    }
  });

  ShotBatch batch;
  batch.shots = shots;
  for (long s = 0; s < shots; ++s) batch.bifurcated += outcomes[s];
  batch.p_b = static_cast<double>(batch.bifurcated) / shots;
  batch.stderr_pb = std::sqrt(std::max(batch.p_b * (1.0 - batch.p_b), 1.0 / shots) / shots);
  if (keep_times) {
    std::vector<double> times;
    times.reserve(shots);
    for (double t : bif_times) {
      if (t >= 0.0) times.push_back(t);
    }
    if (!times.empty()) {
      std::sort(times.begin(), times.end());
      batch.median_bif_time_ns = times[times.size() / 2];
    }
  }
  return batch;
}

}  // namespace

SCurveModel run_scurve_mc(const ReadoutSetup& setup, int prepared, bool shelve,
                          const std::vector<double>& p_grid_db, long shots_per_point,
                          std::uint64_t seed, std::uint64_t stream_tag) {
  if (shots_per_point < 100) {
    throw std::invalid_argument("run_scurve_mc: need at least 100 shots per point");
  }
  if (!std::is_sorted(p_grid_db.begin(), p_grid_db.end())) {
    throw std::invalid_argument("run_scurve_mc: power grid must be sorted");
  }
  const auto pops = prepare_populations(prepared, setup.prep, shelve);

  SCurveModel curve;
  curve.power_db = p_grid_db;
  curve.t_s_ns = setup.pulse.t_s_ns;
  curve.shots_per_point = shots_per_point;
  {
    std::ostringstream label;
    label << "S" << prepared << (shelve ? "_shelved" : "");
    curve.label = label.str();
  }
  curve.p_b.resize(p_grid_db.size());
  curve.stderr_pb.resize(p_grid_db.size());
  for (std::size_t i = 0; i < p_grid_db.size(); ++i) {
    const ShotBatch batch = batch_at_power(setup, pops, p_grid_db[i], shots_per_point, seed,
                                           stream_tag, static_cast<std::uint64_t>(i), false);
    curve.p_b[i] = batch.p_b;
    curve.stderr_pb[i] = batch.stderr_pb;
  }
  return curve;
}

ShotBatch run_shots_at(const ReadoutSetup& setup, int prepared, bool shelve, double p_s_db,
                       long shots, std::uint64_t seed, std::uint64_t stream_tag) {
  const auto pops = prepare_populations(prepared, setup.prep, shelve);
  return batch_at_power(setup, pops, p_s_db, shots, seed, stream_tag, 0, true);
}

HomodyneTrace homodyne_trace(const ShotRecord& shot, const ReadoutSetup& setup,
                             const NoiseChain& noise, std::uint64_t seed) {
  if (!(noise.lpf_cutoff_mhz > 0)) throw std::invalid_argument("NoiseChain.lpf_cutoff_mhz: must be > 0");
  if (!(noise.t_n >= 0)) throw std::invalid_argument("NoiseChain.t_n: must be >= 0");
  const ReadoutPulse& pulse = setup.pulse;

  // The hold power must keep both branches alive, otherwise there is nothing
  // to latch onto during t_H.
  {
    const JbaOperatingPoint pt = setup.point_for_state(shot.initial);
    const double eps_h = drive_from_power(pulse.p_h_db, setup.dev, pulse.f_drive);
    if (!pt.bistable() || steady_states(pt, eps_h).size() < 3) {
      throw std::domain_error("homodyne_trace: holding power is outside the bistable window");
    }
  }

  // Per-sample noise referred to the plateau separation (normalized to 1).
  const double dt_s = noise.dt_ns * 1e-9;
  const double bandwidth = 1.0 / (2.0 * dt_s);
  const double flux_sig =
      std::pow(drive_from_power(pulse.p_h_db, setup.dev, pulse.f_drive), 2) / setup.dev.kappa();
  const double sigma = std::sqrt(kBoltzmann * noise.t_n * bandwidth /
                                 (kPlanck * pulse.f_drive * 1e9 * flux_sig));

  const double tau_step_ns = 2.0 / setup.dev.kappa() * 1e9;  // bifurcation development
  const int n = static_cast<int>(std::ceil(pulse.total_ns() / noise.dt_ns));

  HomodyneTrace trace;
  trace.t_ns.resize(n);
  trace.i.resize(n);
  trace.q.resize(n);

  Rng rng(seed, {0x770ACEULL, shot.stream_key});
  const double a = std::exp(-kTwoPi * noise.lpf_cutoff_mhz * 1e6 * dt_s);
  double yi = 0.0, yq = 0.0;
  for (int k = 0; k < n; ++k) {
    const double t = k * noise.dt_ns;
    double level = 0.0;
    if (shot.bifurcated && t >= shot.bif_time_ns) {
      level = -std::expm1(-(t - shot.bif_time_ns) / tau_step_ns);
    }
    const double xi = level + sigma * rng.normal();
    const double xq = sigma * rng.normal();
    if (k == 0) {
      yi = xi;
      yq = xq;
    } else {
      yi = a * yi + (1.0 - a) * xi;
      yq = a * yq + (1.0 - a) * xq;
    }
    trace.t_ns[k] = t;
    trace.i[k] = yi;
    trace.q[k] = yq;
  }
  return trace;
}

Discrimination discriminate(const std::vector<double>& trace_i, double dt_ns,
                            double window_start_ns, double window_end_ns, double threshold) {
  if (!(dt_ns > 0)) throw std::invalid_argument("discriminate: dt must be > 0");
  const long begin = static_cast<long>(std::floor(window_start_ns / dt_ns));
  const long end = static_cast<long>(std::floor(window_end_ns / dt_ns));
  if (begin < 0 || end > static_cast<long>(trace_i.size()) || end - begin < 2) {
    throw std::invalid_argument("discriminate: degenerate or out-of-range window");
  }
  const long count = end - begin;
  double mean = 0.0;
  for (long k = begin; k < end; ++k) mean += trace_i[k];
  mean /= count;
  double var = 0.0;
  for (long k = begin; k < end; ++k) var += (trace_i[k] - mean) * (trace_i[k] - mean);
  var /= (count - 1);
  const double sem = std::sqrt(var / count);

  Discrimination d;
  d.is_b = mean > threshold;
  d.margin = sem > 0.0 ? std::abs(mean - threshold) / sem
                       : std::numeric_limits<double>::infinity();
  return d;
}

double rabi_excited_population(double dt_ns, double f_rabi_mhz, double decay_us,
                               double thermal_pop) {
  const double envelope = std::exp(-dt_ns * 1e-3 / decay_us);
  const double rotation = 0.5 * (1.0 - std::cos(kTwoPi * f_rabi_mhz * dt_ns * 1e-3) * envelope);
  return thermal_pop + (1.0 - 2.0 * thermal_pop) * rotation;
}

TwoReadoutResult two_readout_run(const ReadoutSetup& setup1, const ReadoutPulse& pulse2,
                                 double delay_ns, double f_rabi_mhz, double rabi_decay_us,
                                 const std::vector<double>& dt_grid_ns, long shots,
                                 std::uint64_t seed) {
  if (delay_ns < 0) throw std::invalid_argument("two_readout_run: delay must be >= 0");
  ReadoutSetup setup2 = setup1;
  setup2.pulse = pulse2;

  const HazardTable table1 = build_hazard_table(setup1, setup1.pulse.p_s_db);
  const HazardTable table2 = build_hazard_table(setup2, pulse2.p_s_db);
  const double idle_r3_ns = setup1.pulse.total_ns() + delay_ns;

  TwoReadoutResult out;
  out.dt_ns = dt_grid_ns;
  const std::size_t n = dt_grid_ns.size();
  out.r1.resize(n);
  out.r2.resize(n);
  out.r3.resize(n);
  out.err1.resize(n);
  out.err2.resize(n);
  out.err3.resize(n);

  for (std::size_t i = 0; i < n; ++i) {
    const double p_e = rabi_excited_population(dt_grid_ns[i], f_rabi_mhz, rabi_decay_us,
                                               setup1.prep.thermal_pop);
    std::vector<std::uint8_t> hit1(shots), hit2(shots), hit3(shots);

    parallel_chunks(shots, [&](long begin, long end) {
      for (long shot = begin; shot < end; ++shot) {
        // Arm with both readout pulses.
        Rng rng(seed, {0xA11ULL, static_cast<std::uint64_t>(i),
                       static_cast<std::uint64_t>(shot)});
        int state = rng.uniform() < p_e ? 1 : 0;
        const ShotRecord rec1 = simulate_shot_from(setup1, table1, state, rng);
        hit1[shot] = rec1.bifurcated;
        state = decay_through(rec1.final_state, delay_ns, setup1.budget, rng);
        const ShotRecord rec2 = simulate_shot_from(setup2, table2, state, rng);
        hit2[shot] = rec2.bifurcated;

        // Arm with the second pulse only, after an equivalent idle.
        Rng rng3(seed, {0xB33ULL, static_cast<std::uint64_t>(i),
                        static_cast<std::uint64_t>(shot)});
        int state3 = rng3.uniform() < p_e ? 1 : 0;
        state3 = decay_through(state3, idle_r3_ns, setup1.budget, rng3);
        const ShotRecord rec3 = simulate_shot_from(setup2, table2, state3, rng3);
        hit3[shot] = rec3.bifurcated;
      }
    });

    auto tally = [&](const std::vector<std::uint8_t>& hits, double& p, double& err) {
      long c = 0;
      for (auto h : hits) c += h;
      p = static_cast<double>(c) / shots;
      err = std::sqrt(std::max(p * (1.0 - p), 1.0 / shots) / shots);
    };
    tally(hit1, out.r1[i], out.err1[i]);
    tally(hit2, out.r2[i], out.err2[i]);
    tally(hit3, out.r3[i], out.err3[i]);
  }
  return out;
}

}  // namespace jbasim
