#pragma once

#include <string>
#include <vector>

namespace jbasim {

struct FitResult {
  std::vector<std::string> names;
  std::vector<double> values;
  std::vector<double> stderrs;
  double residual_norm = 0.0;
  bool converged = false;
  bool degenerate = false;  // identifiability flag (flat data, zero decay)
  std::string model;

  double value(const std::string& name) const;
  double stderr_of(const std::string& name) const;
};

// Nonlinear least squares of y = off + A exp(-x/tau) sin(2 pi f x + phi).
// Frequency initialized from the spectral peak of the detrended data;
// Levenberg-Marquardt with analytic Jacobian, relative step < 1e-9 or 200
// iterations. Flat data converges with A ~ 0 and the degenerate flag set.
// Parameters: amplitude, frequency (1/x units), phase, decay, offset.
FitResult fit_damped_sine(const std::vector<double>& x, const std::vector<double>& y,
                          const std::vector<double>& y_err = {});

// y = off + A exp(-x/tau). Zero-decay input returns an infinite tau sentinel
// with the degenerate flag. Parameters: amplitude, decay, offset.
FitResult fit_exponential(const std::vector<double>& x, const std::vector<double>& y,
                          const std::vector<double>& y_err = {});

}  // namespace jbasim
