#include "jbasim/device.hpp"

#include <cmath>
#include <limits>
#include <vector>

#include "doctest.h"
#include "jbasim/constants.hpp"

using namespace jbasim;

namespace {

// Independent brute-force oracle: cyclic Jacobi eigensolver, no Eigen.
std::vector<double> jacobi_eigenvalues(std::vector<std::vector<double>> a) {
  const int n = static_cast<int>(a.size());
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) off += a[p][q] * a[p][q];
    if (off < 1e-24) break;
    for (int p = 0; p < n; ++p) {
      for (int q = p + 1; q < n; ++q) {
        if (a[p][q] == 0.0) continue;
        const double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (int k = 0; k < n; ++k) {
          const double akp = a[k][p], akq = a[k][q];
          a[k][p] = c * akp - s * akq;
          a[k][q] = s * akp + c * akq;
        }
        for (int k = 0; k < n; ++k) {
          const double apk = a[p][k], aqk = a[q][k];
          a[p][k] = c * apk - s * aqk;
          a[q][k] = s * apk + c * aqk;
        }
      }
    }
  }
  std::vector<double> evals(n);
  for (int i = 0; i < n; ++i) evals[i] = a[i][i];
  std::sort(evals.begin(), evals.end());
  return evals;
}

std::vector<double> brute_force_transmon_levels(double e_j, double e_c, int cutoff, int n_levels) {
  const int dim = 2 * cutoff + 1;
  std::vector<std::vector<double>> h(dim, std::vector<double>(dim, 0.0));
  for (int k = 0; k < dim; ++k) {
    const double n = k - cutoff;
    h[k][k] = e_c * n * n;
    if (k + 1 < dim) h[k][k + 1] = h[k + 1][k] = -0.5 * e_j;
  }
  auto evals = jacobi_eigenvalues(std::move(h));
  std::vector<double> out(n_levels);
  for (int i = 0; i < n_levels; ++i) out[i] = evals[i] - evals[0];
  return out;
}

DeviceParams reference_device() { return DeviceParams{}; }

TransmonSpectrum spectrum_at_delta(const DeviceParams& dev, double delta) {
  const double flux = flux_for_f01(dev, dev.f_c - delta);
  return diagonalize_transmon(flux_tune(dev, flux), dev.e_c);
}

}  // namespace

TEST_CASE("transmon diagonalization reproduces the asymptotic transmon formulas") {
  const auto sp = diagonalize_transmon(21.0, 1.2);
  const double f01_asym = std::sqrt(2.0 * 21.0 * 1.2) - 1.2 / 4.0;  // 6.7993 GHz
  CHECK(std::abs(sp.f01 - f01_asym) / f01_asym < 0.02);
  CHECK(sp.alpha < 0.0);
  CHECK(std::abs(sp.alpha - (-0.30)) < 0.20 * 0.30);
  CHECK(sp.f12 < sp.f01);
  CHECK(sp.charge_elems[0] == doctest::Approx(1.0));
  CHECK(std::abs(sp.charge_elems[1] - std::sqrt(2.0)) < 0.05 * std::sqrt(2.0));
}

TEST_CASE("transmon levels agree with an independent Jacobi eigensolver at cutoff 40") {
  const auto sp = diagonalize_transmon(21.0, 1.2, 4, 40);
  const auto oracle = brute_force_transmon_levels(21.0, 1.2, 40, 4);
  for (int i = 1; i < 4; ++i) {
    CHECK(sp.levels[i] == doctest::Approx(oracle[i]).epsilon(1e-9));
  }
}

TEST_CASE("transmon eigenvalues are stable under charge-cutoff doubling") {
  const auto a = diagonalize_transmon(21.0, 1.2, 4, 20);
  const auto b = diagonalize_transmon(21.0, 1.2, 4, 40);
  for (int i = 1; i < 4; ++i) {
    CHECK(std::abs(a.levels[i] - b.levels[i]) / b.levels[i] < 1e-9);
  }
}

TEST_CASE("near-zero Josephson energy decouples into charging parabolas") {
  const auto sp = diagonalize_transmon(1e-6, 1.2, 5, 10);
  CHECK(sp.levels[1] == doctest::Approx(1.2).epsilon(1e-5));
  CHECK(sp.levels[2] == doctest::Approx(1.2).epsilon(1e-5));
  CHECK(sp.levels[3] == doctest::Approx(4.8).epsilon(1e-5));
  CHECK(sp.levels[4] == doctest::Approx(4.8).epsilon(1e-5));
}

TEST_CASE("anharmonicity stays negative across the transmon regime") {
  for (double ratio : {12.0, 20.0, 35.0, 60.0}) {
    const auto sp = diagonalize_transmon(ratio * 1.2, 1.2, 4, 30);
    CHECK(sp.alpha < 0.0);
  }
}

TEST_CASE("transmon diagonalization input validation") {
  CHECK_THROWS_AS(diagonalize_transmon(21.0, 1.2, 4, 8), std::invalid_argument);
  CHECK_THROWS_AS(diagonalize_transmon(-1.0, 1.2), std::invalid_argument);
  CHECK_THROWS_AS(diagonalize_transmon(21.0, 1.2, 12, 10), std::invalid_argument);
  // A cutoff far too small for the charge spread must fail loudly.
  CHECK_THROWS_AS(diagonalize_transmon(5000.0, 1.2, 4, 10), ConvergenceError);
}

TEST_CASE("flux tuning of the SQUID Josephson energy") {
  DeviceParams dev = reference_device();
  CHECK(flux_tune(dev, 0.0) == doctest::Approx(21.0));
  CHECK(std::abs(flux_tune(dev, 0.5)) < 1e-10);
  CHECK(flux_tune(dev, 0.25) == doctest::Approx(21.0 * std::sqrt(0.5)).epsilon(1e-12));
  for (double phi : {-0.3, 0.1, 0.37, 0.62}) {
    CHECK(flux_tune(dev, phi) == doctest::Approx(flux_tune(dev, phi + 1.0)).epsilon(1e-12));
  }
  dev.d = 0.2;
  CHECK(flux_tune(dev, 0.5) == doctest::Approx(21.0 * 0.2));
}

TEST_CASE("dressed cavity pull at the high-visibility operating point") {
  const DeviceParams dev = reference_device();
  const auto sp = spectrum_at_delta(dev, 0.38);
  CHECK(sp.f01 == doctest::Approx(dev.f_c - 0.38).epsilon(1e-9));

  const auto map = dress_system(dev, sp, 10);
  CHECK(map.pull_01_mhz > 0.0);
  CHECK(std::abs(map.pull_01_mhz - 4.35) < 0.435);  // 10% of the calculated 4.35 MHz

  // Two-level-plus-leakage perturbative oracle.
  const double alpha = std::abs(sp.alpha);
  const double delta = map.delta;
  const double pull_pert = 2e3 * dev.g * dev.g * alpha / (delta * (delta + alpha));
  CHECK(std::abs(map.pull_01_mhz - pull_pert) < 0.15 * pull_pert);

  CHECK(map.pull_02_mhz > map.pull_01_mhz);
  CHECK(std::isfinite(map.f_ci[0]));
  CHECK(std::isfinite(map.f_ci[1]));
  CHECK(std::isfinite(map.f_ci[2]));
}

TEST_CASE("dressing vanishes in the decoupled limit") {
  DeviceParams dev = reference_device();
  dev.g = 1e-6;
  const auto sp = spectrum_at_delta(dev, 0.38);
  const auto map = dress_system(dev, sp, 5);
  CHECK(std::abs(map.pull_01_mhz) < 1e-6);
  for (double f : map.f_ci) CHECK(f == doctest::Approx(dev.f_c).epsilon(1e-9));
}

TEST_CASE("dressed pull approaches the perturbative value as g -> 0") {
  DeviceParams dev = reference_device();
  dev.g = 0.001;  // 1 MHz
  const auto sp = spectrum_at_delta(dev, 0.38);
  const auto map = dress_system(dev, sp, 5);
  const double alpha = std::abs(sp.alpha);
  const double pull_pert = 2e3 * dev.g * dev.g * alpha / (map.delta * (map.delta + alpha));
  CHECK(map.pull_01_mhz / pull_pert == doctest::Approx(1.0).epsilon(0.01));
}

TEST_CASE("Stark map slope at n = 0 matches the cavity pull") {
  const DeviceParams dev = reference_device();
  const auto sp = spectrum_at_delta(dev, 0.38);
  const auto map = dress_system(dev, sp, 20);
  const double slope_mhz = (map.stark[0] - map.stark[1]) * 1e3;
  CHECK(std::abs(slope_mhz - map.pull_01_mhz) < 0.10 * map.pull_01_mhz);
}

TEST_CASE("dispersive precondition is enforced with a named near-degeneracy") {
  const DeviceParams dev = reference_device();
  const auto sp = spectrum_at_delta(dev, 0.03);  // |Delta| < g
  CHECK_THROWS_AS(dress_system(dev, sp, 5), std::domain_error);
}

TEST_CASE("Stark map inversion") {
  const DeviceParams dev = reference_device();
  const auto sp = spectrum_at_delta(dev, 0.38);
  const auto map = dress_system(dev, sp, 20);

  CHECK(std::abs(stark_invert(map, map.stark[0])) < 1e-9);
  CHECK(stark_invert(map, map.stark[10]) == doctest::Approx(10.0).epsilon(1e-9));

  const double mid = 0.5 * (map.stark[4] + map.stark[5]);
  const double n_mid = stark_invert(map, mid);
  CHECK(n_mid > 4.0);
  CHECK(n_mid < 5.0);

  CHECK_THROWS_AS(stark_invert(map, map.stark[0] + 0.01), std::range_error);
  CHECK_THROWS_AS(stark_invert(map, map.stark.back() - 0.01), std::range_error);
}

TEST_CASE("Purcell-limited relaxation time at the high-visibility operating point") {
  const DeviceParams dev = reference_device();
  const auto r = purcell_t1(dev, 0.38);
  CHECK(r.t1_purcell_us == doctest::Approx(1.26).epsilon(0.02));
  CHECK(r.t1_us > 0.44);
  CHECK(r.t1_us < 0.51);
}

TEST_CASE("Purcell channel vanishes at large detuning") {
  const DeviceParams dev = reference_device();
  CHECK(purcell_t1(dev, 1e6).t1_us == doctest::Approx(0.7).epsilon(1e-6));

  DeviceParams lossless = dev;
  lossless.t1_int_us = 1e12;
  const auto r = purcell_t1(lossless, 0.38);
  CHECK(r.t1_us == doctest::Approx(r.t1_purcell_us).epsilon(1e-6));

  CHECK_THROWS_AS(purcell_t1(dev, 0.0), std::domain_error);
}

TEST_CASE("T1 grows monotonically with detuning") {
  const DeviceParams dev = reference_device();
  double prev = 0.0;
  for (double delta = 0.15; delta <= 0.81; delta += 0.05) {
    const double t1 = purcell_t1(dev, delta).t1_us;
    CHECK(t1 > prev);
    prev = t1;
  }
}

TEST_CASE("flux dephasing: zero-noise and sweet-spot inputs are capped and flagged") {
  DeviceParams dev = reference_device();
  dev.a_flux = 0.0;
  CHECK(flux_dephasing_time(dev, 0.2).capped);

  dev = reference_device();
  const auto sweet = flux_dephasing_time(dev, 0.0);  // d = 0 sweet spot
  CHECK(sweet.capped);
  CHECK(sweet.t_phi_us == doctest::Approx(kTphiCapUs));
}

TEST_CASE("flux dephasing time lands in the observed band at Delta = +0.5 GHz") {
  const DeviceParams dev = reference_device();
  const double flux = flux_for_f01(dev, dev.f_c - 0.5);
  const auto r = flux_dephasing_time(dev, flux);
  CHECK_FALSE(r.capped);
  CHECK(r.t_phi_us > 0.3);
  CHECK(r.t_phi_us < 3.0);
}

TEST_CASE("pure dephasing extraction from T1 and T2") {
  CHECK(std::isinf(extract_tphi(0.5, 1.0)));
  CHECK(extract_tphi(0.5, 0.7) == doctest::Approx(1.0 / (1.0 / 0.7 - 1.0)).epsilon(1e-12));
  CHECK(extract_tphi(0.7, 0.7) == doctest::Approx(1.4).epsilon(1e-12));
  CHECK_THROWS_AS(extract_tphi(0.5, 1.0 + 1e-6), std::domain_error);
  CHECK_THROWS_AS(extract_tphi(0.0, 0.5), std::domain_error);
}

TEST_CASE("composing T2 from T1 and T_phi then extracting is the identity") {
  for (double t1 : {0.3, 0.5, 1.1}) {
    for (double tphi : {0.4, 1.0, 7.3}) {
      const double t2 = 1.0 / (0.5 / t1 + 1.0 / tphi);
      CHECK(std::abs(extract_tphi(t1, t2) - tphi) / tphi < 1e-9);
    }
  }
}

TEST_CASE("coherence budget assembles the measured cascade rates") {
  const DeviceParams dev = reference_device();
  const auto sp = spectrum_at_delta(dev, 0.38);
  const auto budget = coherence_budget(dev, sp, 0.38, 1.0);
  CHECK(budget.t1_us == doctest::Approx(0.45).epsilon(0.03));
  const double t1_21 = 1.0 / budget.rate_21;
  CHECK(t1_21 > 0.24);  // the measured 2->1 lifetime scale is ~0.3 us
  CHECK(t1_21 < 0.37);
  CHECK(budget.t2_us <= 2.0 * budget.t1_us * (1 + 1e-12));

  const auto relax_limited =
      coherence_budget(dev, sp, 0.38, std::numeric_limits<double>::infinity());
  CHECK(relax_limited.t2_us == doctest::Approx(2.0 * relax_limited.t1_us).epsilon(1e-12));
}

TEST_CASE("device parameter validation names the offending field") {
  DeviceParams dev = reference_device();
  dev.q0 = -3.0;
  try {
    dev.validate();
    FAIL("expected invalid_argument");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("q0") != std::string::npos);
  }
}
