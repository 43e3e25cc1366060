#include "jbasim/protocols.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "doctest.h"
#include "jbasim/constants.hpp"

using namespace jbasim;

namespace {

ReadoutPulse scurve_timing() {
  ReadoutPulse p;
  p.t_r_ns = 15.0;
  p.t_s_ns = 250.0;
  p.t_h_ns = 700.0;
  return p;
}

const ReadoutSetup& highvis_setup() {
  static const ReadoutSetup setup = make_setup(DeviceParams{}, 0.38, 17.0, scurve_timing());
  return setup;
}

}  // namespace

TEST_CASE("composite readout sequence structure") {
  const auto& setup = highvis_setup();

  const auto plain = build_composite_readout(false, setup);
  REQUIRE(plain.segments.size() == 1);
  CHECK(plain.segments[0].kind == PulseSegment::Kind::readout);

  const auto composite = build_composite_readout(true, setup);
  REQUIRE(composite.segments.size() == 2);
  CHECK(composite.segments[0].kind == PulseSegment::Kind::control);
  CHECK(composite.segments[0].duration_ns == doctest::Approx(20.0));
  CHECK(composite.segments[0].frequency_ghz == doctest::Approx(setup.f12_ghz));
  CHECK(composite.segments[0].start_ns + composite.segments[0].duration_ns <=
        composite.readout_start_ns() + 1e-9);

  PulseSequence bad = composite;
  bad.segments[0].duration_ns = 40.0;  // now overlaps the readout
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("shelving a prepared |0> barely moves the bifurcation probability") {
  const auto& setup = highvis_setup();
  std::vector<double> grid;
  for (int k = -8; k <= 4; ++k) grid.push_back(setup.pulse.p_s_db + 0.5 * k);
  const auto s0 = run_scurve_mc(setup, 0, false, grid, 3000, 404, 1);
  const auto s0_shelved = run_scurve_mc(setup, 0, true, grid, 3000, 404, 2);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    CHECK(std::abs(s0_shelved.p_b[i] - s0.p_b[i]) < 0.02 + 3.0 * s0.stderr_pb[i]);
  }
}

TEST_CASE("Rabi protocol anchors: zero rotation and the first pi time") {
  const auto& setup = highvis_setup();
  std::vector<double> grid{0.0, 17.2};
  const auto res = run_rabi(setup, 29.0, 0.5, grid, 4000, true, 11);
  const auto& pb = res.column("p_b");

  // Zero-duration control leaves the thermal ground state.
  const auto ground = run_scurve_mc(setup, 0, true, {setup.pulse.p_s_db}, 4000, 12, 9);
  CHECK(std::abs(pb.values[0] - ground.p_b[0]) < 4.0 * (pb.stderrs[0] + ground.stderr_pb[0]));

  // Half a Rabi period at 29 MHz maximizes the excited population.
  CHECK(pb.values[1] > 0.85);
}

TEST_CASE("Rabi visibility and decay from the composite readout") {
  const auto& setup = highvis_setup();
  std::vector<double> grid;
  for (double t = 0.0; t <= 1000.0; t += 8.0) grid.push_back(t);
  const auto res = run_rabi(setup, 29.0, 0.5, grid, 2500, true, 21);
  const auto& pb = res.column("p_b");

  const auto fit = fit_damped_sine(grid, pb.values, pb.stderrs);
  REQUIRE(fit.converged);
  const double visibility = 2.0 * fit.value("amplitude");
  CHECK(visibility > 0.90);
  CHECK(visibility < 0.97);
  CHECK(fit.value("decay") == doctest::Approx(500.0).epsilon(0.2));
  CHECK(fit.value("frequency") == doctest::Approx(0.029).epsilon(0.01));
}

TEST_CASE("relaxation protocol recovers the budget T1") {
  const auto& setup = highvis_setup();
  std::vector<double> grid;
  for (double t = 0.0; t <= 2200.0; t += 100.0) grid.push_back(t);
  const auto res = run_t1(setup, grid, 3000, 31);
  const auto& pb = res.column("p_b");
  const auto fit = fit_exponential(grid, pb.values, pb.stderrs);
  REQUIRE(fit.converged);
  const double t1_us = fit.value("decay") * 1e-3;
  CHECK(t1_us > 0.40);
  CHECK(t1_us < 0.60);

  // Without decay channels the curve is flat and tau degenerates.
  ReadoutSetup frozen = setup;
  frozen.budget.rate_10 = 0.0;
  frozen.budget.rate_21 = 0.0;
  const auto flat = run_t1(frozen, grid, 1500, 32);
  const auto ffit = fit_exponential(grid, flat.column("p_b").values);
  CHECK(ffit.degenerate);
  CHECK(std::isinf(ffit.value("decay")));
}

TEST_CASE("Ramsey fringes decay with T2 and oscillate at the applied detuning") {
  ReadoutSetup setup = highvis_setup();

  SUBCASE("relaxation-limited: T2 = 2 T1") {
    setup.budget = coherence_budget(
        setup.dev, diagonalize_transmon(flux_tune(setup.dev, flux_for_f01(setup.dev, setup.dev.f_c - 0.38)), setup.dev.e_c),
        0.38, std::numeric_limits<double>::infinity());
    std::vector<double> grid;
    for (double t = 0.0; t <= 2000.0; t += 25.0) grid.push_back(t);
    const auto res = run_ramsey(setup, 4.0, grid, 12000, 41);
    const auto& pb = res.column("p_b");
    const auto fit = fit_damped_sine(grid, pb.values, pb.stderrs);
    REQUIRE(fit.converged);
    CHECK(fit.value("decay") * 1e-3 ==
          doctest::Approx(2.0 * setup.budget.t1_us).epsilon(0.02));
    CHECK(fit.value("frequency") * 1e3 == doctest::Approx(4.0).epsilon(0.01));
  }

  SUBCASE("rate addition: T_phi = 1 us, T1 = 0.5 us gives T2 = 0.5 us") {
    setup.budget.t1_us = 0.5;
    setup.budget.rate_10 = 2.0;
    setup.budget.t_phi_us = 1.0;
    setup.budget.t2_us = 1.0 / (0.5 / 0.5 + 1.0 / 1.0);
    CHECK(setup.budget.t2_us == doctest::Approx(0.5));
    std::vector<double> grid;
    for (double t = 0.0; t <= 1200.0; t += 16.0) grid.push_back(t);
    const auto res = run_ramsey(setup, 5.0, grid, 12000, 43);
    const auto& pb = res.column("p_b");
    const auto fit = fit_damped_sine(grid, pb.values, pb.stderrs);
    REQUIRE(fit.converged);
    CHECK(fit.value("decay") * 1e-3 == doctest::Approx(0.5).epsilon(0.02));
    CHECK(fit.value("frequency") * 1e3 == doctest::Approx(5.0).epsilon(0.01));
  }

  CHECK_THROWS_AS(run_ramsey(setup, 0.0, {0.0, 10.0}, 100, 1), std::invalid_argument);
}

TEST_CASE("S-curve decomposition recovers synthetic mixtures") {
  const auto& setup = highvis_setup();
  const auto pt0 = setup.point_for_state(0);
  std::vector<double> grid;
  const double thr0 = threshold_power(pt0, setup.dev);
  for (double p = thr0 - 4.0; p <= thr0 + 2.0; p += 0.2) grid.push_back(p);

  const auto s0 = s_curve_analytic(pt0, setup.escape, grid, setup.pulse.t_s_ns, setup.dev);
  JbaOperatingPoint shifted = pt0;
  shifted.delta -= mhz_to_rad_s(4.35);
  const auto s0s = s_curve_analytic(shifted, setup.escape, grid, setup.pulse.t_s_ns, setup.dev);

  CHECK(scurve_decompose(s0, s0, s0s).weight == doctest::Approx(0.0).epsilon(1e-9));

  SCurveModel mix = s0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    mix.p_b[i] = 0.9 * s0s.p_b[i] + 0.1 * s0.p_b[i];
  }
  const auto w = scurve_decompose(mix, s0, s0s);
  CHECK(w.weight == doctest::Approx(0.9).epsilon(1e-6));
  CHECK_FALSE(w.clipped);

  SCurveModel over = s0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    over.p_b[i] = 1.2 * s0s.p_b[i] - 0.2 * s0.p_b[i];
  }
  CHECK(scurve_decompose(over, s0, s0s).clipped);

  SCurveModel off_grid = s0;
  off_grid.power_db[0] += 0.5;
  CHECK_THROWS_AS(scurve_decompose(off_grid, s0, s0s), std::invalid_argument);
}

TEST_CASE("S-curve shift matching recovers the cavity pull without decay") {
  ReadoutSetup setup = highvis_setup();
  setup.budget.rate_10 = 0.0;
  setup.budget.rate_21 = 0.0;
  setup.prep = PrepModel{0.0, 0.0};

  const auto pt0 = setup.point_for_state(0);
  const auto pt1 = setup.point_for_state(1);
  const double thr1 = threshold_power(pt1, setup.dev);
  const double thr0 = threshold_power(pt0, setup.dev);
  std::vector<double> grid;
  for (double p = thr1 - 2.0; p <= thr0 + 1.5; p += 0.2) grid.push_back(p);

  const auto s1 = run_scurve_mc(setup, 1, false, grid, 3000, 51, 7);
  auto generator = [&](double shift_mhz) {
    JbaOperatingPoint pt = pt0;
    pt.delta -= mhz_to_rad_s(shift_mhz);
    return s_curve_analytic(pt, setup.escape, grid, setup.pulse.t_s_ns, setup.dev);
  };
  const double df1 = scurve_shift_match(s1, generator);
  CHECK(df1 == doctest::Approx(setup.map.pull_01_mhz).epsilon(0.05));

  // A curve matched against itself wants no shift.
  const auto s0 = s_curve_analytic(pt0, setup.escape, grid, setup.pulse.t_s_ns, setup.dev);
  CHECK(scurve_shift_match(s0, generator) < 0.05);

  SCurveModel high = s0;
  for (auto& v : high.p_b) v = std::max(v, 0.5);
  CHECK_THROWS_AS(scurve_shift_match(high, generator), std::invalid_argument);
}

TEST_CASE("AC-Stark calibration: hysteretic photon number and invertible Stark map") {
  const DeviceParams dev;
  ReadoutPulse timing = scurve_timing();
  const ReadoutSetup setup = make_setup(dev, 0.25, 25.0, timing, 130);

  const auto pt = setup.point_for_state(0);
  const double thr = threshold_power(pt, dev);
  std::vector<double> grid;
  for (double p = thr - 15.0; p <= thr + 12.0; p += 0.25) grid.push_back(p);
  const auto res = run_ac_stark(setup, grid);
  const auto& n_bar = res.column("n_bar").values;
  const auto& f01 = res.column("f01_ghz").values;
  const auto& n_inv = res.column("n_bar_inverted").values;

  double n_below_max = 0.0;
  double jump_ratio = 0.0;
  for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
    if (n_bar[i + 1] > 3.0 * n_bar[i] && n_bar[i] > 1.0) {
      jump_ratio = n_bar[i + 1] / n_bar[i];
      n_below_max = n_bar[i];
    }
  }
  CHECK(jump_ratio >= 3.0);          // discontinuous jump across threshold
  CHECK(n_below_max >= 5.0);
  CHECK(n_below_max <= 10.0);

  // Below threshold the qubit stays near its unshifted frequency.
  CHECK(res.column("n_bar").values.front() < 0.5);
  CHECK(std::abs(f01.front() - setup.map.stark[0]) < 0.005);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    CHECK(std::abs(n_inv[i] - n_bar[i]) <= 0.1);
  }
}

TEST_CASE("Rabi visibility never exceeds the S-curve contrast at the same settings") {
  const auto& setup = highvis_setup();
  const double p_s = setup.pulse.p_s_db;
  const long shots = 6000;

  // Contrast between the shelved excited state and the thermal ground state
  // at the operating power itself.
  const auto exc = run_scurve_mc(setup, 1, true, {p_s}, shots, 61, 1);
  const auto gnd = run_scurve_mc(setup, 0, false, {p_s}, shots, 61, 2);
  const double contrast = exc.p_b[0] - gnd.p_b[0];

  std::vector<double> grid;
  for (double t = 0.0; t <= 800.0; t += 8.0) grid.push_back(t);
  const auto res = run_rabi(setup, 29.0, 0.5, grid, shots, true, 61);
  const auto& pb = res.column("p_b");
  const auto fit = fit_damped_sine(grid, pb.values, pb.stderrs);
  const double visibility = 2.0 * fit.value("amplitude");

  CHECK(visibility <= contrast + 2.0 * exc.stderr_pb[0] + 2.0 * gnd.stderr_pb[0]);
}

TEST_CASE("experiment results are reproducible from (config, seed)") {
  const auto& setup = highvis_setup();
  std::vector<double> grid{0.0, 10.0, 20.0, 30.0};
  const auto a = run_rabi(setup, 29.0, 0.5, grid, 1000, true, 99);
  const auto b = run_rabi(setup, 29.0, 0.5, grid, 1000, true, 99);
  CHECK(a.column("p_b").values == b.column("p_b").values);
  CHECK(a.device_hash == b.device_hash);
}

TEST_CASE("detuning sweep smoke test: coherent columns and sane trade-off values") {
  const DeviceParams dev;
  DetuningPointConfig cfg;
  cfg.shots_optimize = 1200;
  cfg.shots_scurve = 1500;
  const std::vector<double> deltas{0.30, 0.38, 0.50};
  const auto res =
      contrast_vs_detuning(dev, deltas, scurve_timing(), EscapeModel{}, PrepModel{}, cfg, 5);

  const auto& c = res.column("contrast_composite").values;
  const auto& cp = res.column("contrast_plain").values;
  const auto& t1 = res.column("t1_us").values;
  const auto& df1 = res.column("delta_f1_mhz").values;
  const auto& pull = res.column("pull_01_mhz").values;
  for (std::size_t i = 0; i < deltas.size(); ++i) {
    REQUIRE(std::isfinite(c[i]));
    CHECK(c[i] > 0.6);
    CHECK(c[i] <= 1.0);
    CHECK(c[i] >= cp[i] - 0.03);  // shelving never hurts
    CHECK(t1[i] == doctest::Approx(purcell_t1(dev, deltas[i]).t1_us).epsilon(1e-6));
    CHECK(std::abs(df1[i] - pull[i]) < 0.2 * pull[i] + 0.2);
  }
  // T1 grows with detuning; the pull shrinks.
  CHECK(t1[2] > t1[0]);
  CHECK(pull[2] < pull[0]);
}
