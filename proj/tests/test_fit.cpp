#include "jbasim/fit.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "jbasim/constants.hpp"
#include "jbasim/rng.hpp"

using namespace jbasim;

namespace {

std::vector<double> linspace(double a, double b, int n) {
  std::vector<double> v(n);
  for (int i = 0; i < n; ++i) v[i] = a + (b - a) * i / (n - 1);
  return v;
}

std::vector<double> damped_sine(const std::vector<double>& x, double a, double f, double phi,
                                double tau, double off) {
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    y[i] = off + a * std::exp(-x[i] / tau) * std::sin(kTwoPi * f * x[i] + phi);
  }
  return y;
}

}  // namespace

TEST_CASE("damped sine fit recovers noiseless parameters to 0.1%") {
  const auto x = linspace(0.0, 250.0, 126);
  const auto y = damped_sine(x, 0.94, 0.029, 0.4, 500.0, 0.5);
  const auto fit = fit_damped_sine(x, y);
  REQUIRE(fit.converged);
  CHECK(fit.value("amplitude") == doctest::Approx(0.94).epsilon(1e-3));
  CHECK(fit.value("frequency") == doctest::Approx(0.029).epsilon(1e-3));
  CHECK(fit.value("decay") == doctest::Approx(500.0).epsilon(1e-3));
  CHECK(fit.value("offset") == doctest::Approx(0.5).epsilon(1e-3));
  CHECK(fit.value("phase") == doctest::Approx(0.4).epsilon(1e-3));
}

TEST_CASE("flat data converges with zero amplitude and the degenerate flag") {
  const auto x = linspace(0.0, 100.0, 20);
  const std::vector<double> y(20, 0.37);
  const auto fit = fit_damped_sine(x, y);
  CHECK(fit.converged);
  CHECK(fit.degenerate);
  CHECK(std::abs(fit.value("amplitude")) < 1e-9);
  CHECK(fit.value("offset") == doctest::Approx(0.37));
}

TEST_CASE("damped sine fit under 1% noise stays within three stderr") {
  const auto x = linspace(0.0, 300.0, 120);
  auto y = damped_sine(x, 0.9, 0.031, -0.7, 450.0, 0.48);
  Rng rng(0xF17, {});
  std::vector<double> err(x.size(), 0.01);
  for (auto& v : y) v += 0.01 * rng.normal();

  const auto fit = fit_damped_sine(x, y, err);
  REQUIRE(fit.converged);
  CHECK(std::abs(fit.value("amplitude") - 0.9) < 3.0 * fit.stderr_of("amplitude"));
  CHECK(std::abs(fit.value("frequency") - 0.031) < 3.0 * fit.stderr_of("frequency"));
  CHECK(std::abs(fit.value("decay") - 450.0) < 3.0 * fit.stderr_of("decay"));
  CHECK(std::abs(fit.value("offset") - 0.48) < 3.0 * fit.stderr_of("offset"));
}

TEST_CASE("damped sine fit rejects inadequate inputs") {
  CHECK_THROWS_AS(fit_damped_sine({0, 1, 2}, {0, 1, 0}), std::invalid_argument);
  // A third of a period over the whole span.
  const auto x = linspace(0.0, 10.0, 30);
  const auto y = damped_sine(x, 1.0, 0.03, 0.0, 1e6, 0.0);
  CHECK_THROWS_AS(fit_damped_sine(x, y), std::invalid_argument);
}

TEST_CASE("fitter coverage: 95% of noisy round-trips within three stderr") {
  Rng rng(0xC0FE, {});
  int checks = 0, hits = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const double a = 0.5 + 0.5 * rng.uniform();
    const double f = 0.02 + 0.02 * rng.uniform();
    const double tau = 300.0 + 500.0 * rng.uniform();
    const double off = 0.2 + 0.4 * rng.uniform();
    const auto x = linspace(0.0, 280.0, 100);
    auto y = damped_sine(x, a, f, 0.3, tau, off);
    std::vector<double> err(x.size(), 0.01);
    for (auto& v : y) v += 0.01 * rng.normal();
    const auto fit = fit_damped_sine(x, y, err);
    if (!fit.converged) continue;
    const double truth[4] = {a, f, tau, off};
    const char* names[4] = {"amplitude", "frequency", "decay", "offset"};
    for (int k = 0; k < 4; ++k) {
      ++checks;
      if (std::abs(fit.value(names[k]) - truth[k]) < 3.0 * fit.stderr_of(names[k])) ++hits;
    }
  }
  CHECK(checks >= 780);  // essentially every trial converges
  CHECK(static_cast<double>(hits) / checks >= 0.95);
}

TEST_CASE("exponential fit round-trips and flags zero decay") {
  const auto x = linspace(0.0, 2000.0, 40);
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    y[i] = 0.1 + 0.8 * std::exp(-x[i] / 450.0);
  }
  const auto fit = fit_exponential(x, y);
  REQUIRE(fit.converged);
  CHECK(fit.value("decay") == doctest::Approx(450.0).epsilon(1e-2));
  CHECK(fit.value("amplitude") == doctest::Approx(0.8).epsilon(1e-2));
  CHECK(fit.value("offset") == doctest::Approx(0.1).epsilon(1e-2));

  const std::vector<double> flat(x.size(), 0.9);
  const auto none = fit_exponential(x, flat);
  CHECK(none.converged);
  CHECK(none.degenerate);
  CHECK(std::isinf(none.value("decay")));

  Rng rng(0xE4, {});
  auto noisy = y;
  std::vector<double> err(x.size(), 0.01);
  for (auto& v : noisy) v += 0.01 * rng.normal();
  const auto nfit = fit_exponential(x, noisy, err);
  REQUIRE(nfit.converged);
  CHECK(std::abs(nfit.value("decay") - 450.0) < 3.0 * nfit.stderr_of("decay"));
}
