#include "jbasim/protocols.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <thread>

#include "jbasim/constants.hpp"

namespace jbasim {

namespace {

constexpr std::uint64_t kTagRabi = 0x4A11;
constexpr std::uint64_t kTagT1 = 0x4A12;
constexpr std::uint64_t kTagRamsey = 0x4A13;
constexpr std::uint64_t kTagSweepOpt = 0x4A14;
constexpr std::uint64_t kTagSweepCurve = 0x4A15;

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

double binomial_err(double p, long shots) {
  return std::sqrt(std::max(p * (1.0 - p), 1.0 / shots) / shots);
}

// p_B of one readout following a two-level control preparation with excited
// population p_e; optional shelving transfer before the pulse.
double readout_probability(const ReadoutSetup& setup, const HazardTable& table, double p_e,
                           bool composite, long shots, std::uint64_t seed,
                           std::uint64_t stream_tag, std::uint64_t point_idx) {
  const double e = setup.prep.pulse_error;
  std::array<double, 3> pops{1.0 - p_e, p_e, 0.0};
  if (composite) {
    const double p0 = pops[0], p1 = pops[1];
    pops[0] = (1.0 - e) * p0;
    pops[1] = e * p0 + e * p1;
    pops[2] = (1.0 - e) * p1;
  }
  std::vector<std::uint8_t> hits(shots, 0);
  parallel_chunks(shots, [&](long begin, long end) {
    for (long shot = begin; shot < end; ++shot) {
      Rng rng(seed, {stream_tag, point_idx, static_cast<std::uint64_t>(shot)});
      const double u = rng.uniform();
      const int initial = u < pops[0] ? 0 : (u < pops[0] + pops[1] ? 1 : 2);
      hits[shot] = simulate_shot_from(setup, table, initial, rng).bifurcated;
    }
  });
  long c = 0;
  for (auto h : hits) c += h;
  return static_cast<double>(c) / shots;
}

}  // namespace

void PulseSequence::validate() const {
  double first_readout = std::numeric_limits<double>::infinity();
  for (const auto& seg : segments) {
    if (!(seg.duration_ns > 0)) throw std::invalid_argument("PulseSequence: durations must be > 0");
    if (seg.kind == PulseSegment::Kind::readout) {
      first_readout = std::min(first_readout, seg.start_ns);
    }
  }
  for (std::size_t a = 0; a < segments.size(); ++a) {
    if (segments[a].kind == PulseSegment::Kind::control &&
        segments[a].start_ns + segments[a].duration_ns > first_readout + 1e-9) {
      throw std::invalid_argument("PulseSequence: control pulse overlaps the readout");
    }
    for (std::size_t b = a + 1; b < segments.size(); ++b) {
      if (segments[a].kind != segments[b].kind) continue;
      const double a0 = segments[a].start_ns, a1 = a0 + segments[a].duration_ns;
      const double b0 = segments[b].start_ns, b1 = b0 + segments[b].duration_ns;
      if (a0 < b1 - 1e-9 && b0 < a1 - 1e-9) {
        throw std::invalid_argument("PulseSequence: same-channel segments overlap");
      }
    }
  }
}

double PulseSequence::readout_start_ns() const {
  double t = std::numeric_limits<double>::infinity();
  for (const auto& seg : segments) {
    if (seg.kind == PulseSegment::Kind::readout) t = std::min(t, seg.start_ns);
  }
  return t;
}

PulseSequence build_composite_readout(bool shelve, const ReadoutSetup& setup, double t_pi_ns) {
  PulseSequence seq;
  double t0 = 0.0;
  if (shelve) {
    PulseSegment pi12;
    pi12.kind = PulseSegment::Kind::control;
    pi12.frequency_ghz = setup.f12_ghz;
    pi12.amplitude = M_PI;
    pi12.start_ns = 0.0;
    pi12.duration_ns = t_pi_ns;
    seq.segments.push_back(pi12);
    t0 = t_pi_ns;
  }
  PulseSegment readout;
  readout.kind = PulseSegment::Kind::readout;
  readout.frequency_ghz = setup.pulse.f_drive;
  readout.amplitude = setup.pulse.p_s_db;
  readout.start_ns = t0;
  readout.duration_ns = setup.pulse.total_ns();
  seq.segments.push_back(readout);
  seq.validate();
  return seq;
}

const Column& ExperimentResult::column(const std::string& name) const {
  for (const auto& c : columns) {
    if (c.name == name) return c;
  }
  throw std::out_of_range("ExperimentResult: no column named " + name);
}

std::string device_hash(const DeviceParams& dev) {
  char buf[512];
  std::snprintf(buf, sizeof(buf),
                "%.17g|%.17g|%.17g|%.17g|%.17g|%.17g|%.17g|%.17g|%.17g|%.17g|%.17g|%.17g",
                dev.f_c, dev.q0, dev.i_c, dev.kerr_mhz, dev.g, dev.e_j_max, dev.e_c, dev.d,
                dev.t1_int_us, dev.a_flux, dev.t_n, dev.atten_db);
  // FNV-1a over the canonical field string.
  std::uint64_t h = 1469598103934665603ULL;
  for (const char* p = buf; *p; ++p) {
    h ^= static_cast<unsigned char>(*p);
    h *= 1099511628211ULL;
  }
  char out[20];
  std::snprintf(out, sizeof(out), "%016llx", static_cast<unsigned long long>(h));
  return out;
}

ReadoutSetup make_setup(const DeviceParams& dev, double delta_ghz, double f_offset_mhz,
                        const ReadoutPulse& timing, int n_photons_max) {
  dev.validate();
  const double flux = flux_for_f01(dev, dev.f_c - delta_ghz);
  const auto spectrum = diagonalize_transmon(flux_tune(dev, flux), dev.e_c);

  ReadoutSetup setup;
  setup.dev = dev;
  setup.map = dress_system(dev, spectrum, n_photons_max);
  setup.budget =
      coherence_budget(dev, spectrum, setup.map.delta, flux_dephasing_time(dev, flux).t_phi_us);
  setup.f12_ghz = spectrum.f12;
  setup.pulse = timing;
  setup.pulse.f_drive = dev.f_c - f_offset_mhz * 1e-3;

  const JbaOperatingPoint pt1 = setup.point_for_state(1);
  if (pt1.bistable()) {
    const double thr1 = threshold_power(pt1, dev);
    setup.pulse.p_s_db = thr1 + 0.3;
    setup.pulse.p_h_db = setup.pulse.p_s_db - 3.0;
  }
  setup.pulse.validate();
  return setup;
}

ExperimentResult run_rabi(const ReadoutSetup& setup, double f_rabi_mhz, double rabi_decay_us,
                          const std::vector<double>& dt_grid_ns, long shots, bool composite,
                          std::uint64_t seed) {
  if (!std::is_sorted(dt_grid_ns.begin(), dt_grid_ns.end())) {
    throw std::invalid_argument("run_rabi: duration grid must be sorted");
  }
  const HazardTable table = build_hazard_table(setup, setup.pulse.p_s_db);

  ExperimentResult res;
  res.protocol = composite ? "rabi_composite" : "rabi";
  res.x_name = "dt_ns";
  res.x = dt_grid_ns;
  res.seed = seed;
  res.device_hash = device_hash(setup.dev);

  Column pb{"p_b", {}, {}};
  for (std::size_t i = 0; i < dt_grid_ns.size(); ++i) {
    const double p_e = rabi_excited_population(dt_grid_ns[i], f_rabi_mhz, rabi_decay_us,
                                               setup.prep.thermal_pop);
    const double p = readout_probability(setup, table, p_e, composite, shots, seed, kTagRabi,
                                         static_cast<std::uint64_t>(i));
    pb.values.push_back(p);
    pb.stderrs.push_back(binomial_err(p, shots));
  }
  res.columns.push_back(std::move(pb));
  return res;
}

ExperimentResult run_t1(const ReadoutSetup& setup, const std::vector<double>& delay_grid_ns,
                        long shots, std::uint64_t seed) {
  const HazardTable table = build_hazard_table(setup, setup.pulse.p_s_db);
  const auto pops = prepare_populations(1, setup.prep, false);

  ExperimentResult res;
  res.protocol = "t1";
  res.x_name = "delay_ns";
  res.x = delay_grid_ns;
  res.seed = seed;
  res.device_hash = device_hash(setup.dev);

  Column pb{"p_b", {}, {}};
  for (std::size_t i = 0; i < delay_grid_ns.size(); ++i) {
    std::vector<std::uint8_t> hits(shots, 0);
    parallel_chunks(shots, [&](long begin, long end) {
      for (long shot = begin; shot < end; ++shot) {
        Rng rng(seed, {kTagT1, static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(shot)});
        const double u = rng.uniform();
        int state = u < pops[0] ? 0 : (u < pops[0] + pops[1] ? 1 : 2);
        double left = delay_grid_ns[i];
        while (state > 0 && left > 0.0) {
          const double rate_ns =
              (state == 2 ? setup.budget.rate_21 : setup.budget.rate_10) * 1e-3;
          if (rate_ns <= 0.0) break;
          const double wait = rng.exponential(rate_ns);
          if (wait >= left) break;
          left -= wait;
          --state;
        }
        hits[shot] = simulate_shot_from(setup, table, state, rng).bifurcated;
      }
    });
    long c = 0;
    for (auto h : hits) c += h;
    const double p = static_cast<double>(c) / shots;
    pb.values.push_back(p);
    pb.stderrs.push_back(binomial_err(p, shots));
  }
  res.columns.push_back(std::move(pb));
  return res;
}

ExperimentResult run_ramsey(const ReadoutSetup& setup, double detuning_mhz,
                            const std::vector<double>& delay_grid_ns, long shots,
                            std::uint64_t seed) {
  if (detuning_mhz == 0.0) {
    throw std::invalid_argument("run_ramsey: applied detuning must be nonzero");
  }
  const HazardTable table = build_hazard_table(setup, setup.pulse.p_s_db);
  const double t2_us = setup.budget.t2_us;

  ExperimentResult res;
  res.protocol = "ramsey";
  res.x_name = "delay_ns";
  res.x = delay_grid_ns;
  res.seed = seed;
  res.device_hash = device_hash(setup.dev);

  Column pb{"p_b", {}, {}};
  for (std::size_t i = 0; i < delay_grid_ns.size(); ++i) {
    const double tau = delay_grid_ns[i];
    // Two pi/2 pulses: the fringe rides at half amplitude and decays with T2.
    const double fringe = std::cos(kTwoPi * detuning_mhz * 1e-3 * tau) *
                          std::exp(-tau * 1e-3 / t2_us);
    const double p_ideal = 0.5 * (1.0 + fringe);
    const double p_e = setup.prep.thermal_pop + (1.0 - 2.0 * setup.prep.thermal_pop) * p_ideal;
    const double p = readout_probability(setup, table, p_e, false, shots, seed, kTagRamsey,
                                         static_cast<std::uint64_t>(i));
    pb.values.push_back(p);
    pb.stderrs.push_back(binomial_err(p, shots));
  }
  res.columns.push_back(std::move(pb));
  return res;
}

DecomposeResult scurve_decompose(const SCurveModel& target, const SCurveModel& base,
                                 const SCurveModel& base_shifted) {
  const std::size_t n = target.power_db.size();
  if (base.power_db.size() != n || base_shifted.power_db.size() != n) {
    throw std::invalid_argument("scurve_decompose: power grids differ in size");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (std::abs(target.power_db[i] - base.power_db[i]) > 1e-9 ||
        std::abs(target.power_db[i] - base_shifted.power_db[i]) > 1e-9) {
      throw std::invalid_argument("scurve_decompose: power grids do not match");
    }
  }
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = base_shifted.p_b[i] - base.p_b[i];
    num += (target.p_b[i] - base.p_b[i]) * d;
    den += d * d;
  }
  if (den <= 0.0) throw std::invalid_argument("scurve_decompose: reference curves coincide");

  DecomposeResult out;
  out.weight = num / den;
  if (out.weight < 0.0 || out.weight > 1.0) {
    out.weight = std::clamp(out.weight, 0.0, 1.0);
    out.clipped = true;
  }
  return out;
}

double golden_section_max(const std::function<double(double)>& f, double lo, double hi,
                          double tol) {
  const double inv_phi = 0.6180339887498949;
  double a = lo, b = hi;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = f(c), fd = f(d);
  while (b - a > tol) {
    if (fc >= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

double scurve_shift_match(const SCurveModel& target,
                          const std::function<SCurveModel(double)>& generator_at_shift,
                          double max_shift_mhz) {
  std::vector<std::size_t> low;
  for (std::size_t i = 0; i < target.p_b.size(); ++i) {
    if (target.p_b[i] < 0.3) low.push_back(i);
  }
  if (low.size() < 3) {
    throw std::invalid_argument("scurve_shift_match: target has no usable low-p_B region");
  }
  auto misfit = [&](double shift) {
    const SCurveModel ref = generator_at_shift(shift);
    double acc = 0.0;
    for (std::size_t i : low) {
      const double d = target.p_b[i] - ref.p_b[i];
      acc += d * d;
    }
    return -acc;
  };
  return golden_section_max(misfit, 0.0, max_shift_mhz, 1e-3);
}

ExperimentResult run_ac_stark(const ReadoutSetup& setup, const std::vector<double>& p_grid_db) {
  const JbaOperatingPoint pt = setup.point_for_state(0);
  const Spinodals sp = spinodals(pt);

  ExperimentResult res;
  res.protocol = "ac_stark";
  res.x_name = "p_db";
  res.x = p_grid_db;
  res.device_hash = device_hash(setup.dev);

  Column n_bar{"n_bar", {}, {}};
  Column f01{"f01_ghz", {}, {}};
  Column n_inv{"n_bar_inverted", {}, {}};

  const std::size_t n_max = setup.map.stark.size() - 1;
  for (double p_db : p_grid_db) {
    const double eps = drive_from_power(p_db, setup.dev, pt.f_drive);
    const auto roots = steady_states(pt, eps);
    // Hysteretic up-sweep: stay on the low branch until it vanishes.
    const double n = (eps * eps < sp.eps2_up) ? roots.front() : roots.back();

    // Stark map interpolated at fractional photon number.
    if (n > static_cast<double>(n_max)) {
      std::ostringstream msg;
      msg << "run_ac_stark: photon number " << n << " exceeds the tabulated Stark range ("
          << n_max << "); enlarge n_photons_max";
      throw std::range_error(msg.str());
    }
    const std::size_t k = std::min(static_cast<std::size_t>(n), n_max - 1);
    const double frac = std::min(n - k, 1.0);
    const double f = setup.map.stark[k] * (1.0 - frac) + setup.map.stark[k + 1] * frac;

    n_bar.values.push_back(n);
    f01.values.push_back(f);
    n_inv.values.push_back(stark_invert(setup.map, f));
  }
  res.columns.push_back(std::move(n_bar));
  res.columns.push_back(std::move(f01));
  res.columns.push_back(std::move(n_inv));
  return res;
}

ExperimentResult contrast_vs_detuning(const DeviceParams& dev,
                                      const std::vector<double>& delta_grid_ghz,
                                      const ReadoutPulse& timing, const EscapeModel& escape,
                                      const PrepModel& prep, const DetuningPointConfig& cfg,
                                      std::uint64_t seed) {
  ExperimentResult res;
  res.protocol = "sweep_detuning";
  res.x_name = "delta_ghz";
  res.x = delta_grid_ghz;
  res.seed = seed;
  res.device_hash = device_hash(dev);

  Column contrast{"contrast_composite", {}, {}};
  Column contrast_plain{"contrast_plain", {}, {}};
  Column pull_meas{"delta_f1_mhz", {}, {}};
  Column pull_calc{"pull_01_mhz", {}, {}};
  Column t1{"t1_us", {}, {}};
  Column tphi{"t_phi_us", {}, {}};
  Column p_opt{"p_s_opt_db", {}, {}};
  const double nan = std::numeric_limits<double>::quiet_NaN();

  for (std::size_t gi = 0; gi < delta_grid_ghz.size(); ++gi) {
    const double delta = delta_grid_ghz[gi];
    try {
      ReadoutSetup setup;
      {
        const double flux = flux_for_f01(dev, dev.f_c - delta);
        const auto spectrum = diagonalize_transmon(flux_tune(dev, flux), dev.e_c);
        setup.dev = dev;
        setup.map = dress_system(dev, spectrum, 30);
        setup.budget = coherence_budget(dev, spectrum, setup.map.delta,
                                        flux_dephasing_time(dev, flux).t_phi_us);
        setup.escape = escape;
        setup.prep = prep;
        setup.f12_ghz = spectrum.f12;
        setup.pulse = timing;
        // Drive so that the state-1 detuning stays at 15 MHz; this keeps both
        // states bistable across the grid (a fixed bare offset would not).
        setup.pulse.f_drive = setup.map.f_ci[1] - 0.015;
        setup.pulse.p_h_db = setup.pulse.p_s_db - 3.0;
      }

      const double thr2 = threshold_power(setup.point_for_state(2), dev);
      const double thr0 = threshold_power(setup.point_for_state(0), dev);

      // Common-random-number objective: the same shot substreams at every
      // probed power make the contrast a smooth deterministic function.
      const double p_e_pi = prepare_populations(1, prep, false)[1];
      auto contrast_at = [&](double p_db, bool composite) {
        const HazardTable table = build_hazard_table(setup, p_db);
        const double p_exc = readout_probability(setup, table, p_e_pi, composite,
                                                 cfg.shots_optimize, seed,
                                                 kTagSweepOpt + (composite ? 1 : 0), gi);
        const double p_gnd = readout_probability(setup, table, prep.thermal_pop, false,
                                                 cfg.shots_optimize, seed, kTagSweepOpt + 2, gi);
        return p_exc - p_gnd;
      };

      const double p_best = golden_section_max(
          [&](double p) { return contrast_at(p, true); }, thr2 - 2.0, thr0 + 3.0,
          cfg.golden_tol_db);
      const double c_comp = contrast_at(p_best, true);
      const double p_best_plain = golden_section_max(
          [&](double p) { return contrast_at(p, false); }, thr2 - 2.0, thr0 + 3.0,
          cfg.golden_tol_db);
      const double c_plain = contrast_at(p_best_plain, false);

      // Effective pull from the S1 shift match against the analytic S0.
      double df1 = nan;
      {
        setup.pulse.p_s_db = p_best_plain;
        setup.pulse.p_h_db = p_best_plain - 3.0;
        const double thr1 = threshold_power(setup.point_for_state(1), dev);
        std::vector<double> grid;
        for (double p = thr1 - 2.5; p <= thr0 + 2.0; p += 0.25) grid.push_back(p);
        const auto s1 = run_scurve_mc(setup, 1, false, grid, cfg.shots_scurve, seed,
                                      kTagSweepCurve + 100 * gi);
        const JbaOperatingPoint pt0 = setup.point_for_state(0);
        auto generator = [&](double shift_mhz) {
          JbaOperatingPoint pt = pt0;
          pt.delta -= mhz_to_rad_s(shift_mhz);
          return s_curve_analytic(pt, setup.escape, grid, setup.pulse.t_s_ns, dev);
        };
        df1 = scurve_shift_match(s1, generator,
                                 std::max(12.0, 2.0 * setup.map.pull_01_mhz));
      }

      contrast.values.push_back(c_comp);
      contrast.stderrs.push_back(binomial_err(c_comp, cfg.shots_optimize) * std::sqrt(2.0));
      contrast_plain.values.push_back(c_plain);
      contrast_plain.stderrs.push_back(binomial_err(c_plain, cfg.shots_optimize) * std::sqrt(2.0));
      pull_meas.values.push_back(df1);
      pull_calc.values.push_back(setup.map.pull_01_mhz);
      t1.values.push_back(setup.budget.t1_us);
      tphi.values.push_back(setup.budget.t_phi_us);
      p_opt.values.push_back(p_best);
    } catch (const std::exception&) {
      // Record the failure and keep sweeping.
      for (Column* c : {&contrast, &contrast_plain, &pull_meas, &pull_calc, &t1, &tphi, &p_opt}) {
        c->values.push_back(nan);
        if (c == &contrast || c == &contrast_plain) c->stderrs.push_back(nan);
      }
    }
  }

  res.columns = {std::move(contrast), std::move(contrast_plain), std::move(pull_meas),
                 std::move(pull_calc), std::move(t1), std::move(tphi), std::move(p_opt)};
  return res;
}

}  // namespace jbasim
