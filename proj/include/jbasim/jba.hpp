#pragma once

#include <string>
#include <vector>

#include "jbasim/device.hpp"

namespace jbasim {

// Operating point of the driven Kerr resonator for one qubit state. Drive
// below the (state-dependent) cavity resonance with a softening Kerr, so
// delta > 0 and the high-amplitude branch B sits past the bent resonance.
struct JbaOperatingPoint {
  double f_drive = 0.0;  // readout frequency (GHz)
  double delta = 0.0;    // angular detuning 2*pi*(f_Ci - f) (rad/s)
  double kappa = 0.0;    // cavity energy decay rate (rad/s)
  double kerr = 0.0;     // angular Kerr per photon, 2*pi*K (rad/s), negative

  double omega() const { return 2.0 * delta / kappa; }  // reduced detuning
  bool bistable() const;                                 // omega > sqrt(3)

  void validate() const;

  static JbaOperatingPoint from_device(const DeviceParams& dev, double f_ci_ghz,
                                       double f_drive_ghz);
};

// Noise-activated escape out of the low-amplitude branch, with the cubic
// near-threshold barrier scaling.
struct EscapeModel {
  double attempt_rate_hz = 2.6e7;  // prefactor omega_att/(2 pi); calibrated with b
  double barrier_scale = 40.0;     // dimensionless exponent scale b
  static constexpr double kExponent = 1.5;
};

struct SCurveModel {
  std::vector<double> power_db;  // sampling powers P_S (dB at fridge input)
  std::vector<double> p_b;       // bifurcation probabilities
  std::vector<double> stderr_pb; // binomial standard errors (0 for analytic curves)
  long shots_per_point = 0;
  double t_s_ns = 0.0;
  std::string label;
};

// All non-negative steady intracavity photon numbers of
// [(delta - |K| n)^2 + (kappa/2)^2] n = eps^2, ascending. One or three roots
// generically, two exactly at a spinodal (reported once each).
std::vector<double> steady_states(const JbaOperatingPoint& pt, double eps);

struct Spinodals {
  double n_low = 0.0;         // end of the low-amplitude branch (n_minus)
  double n_high = 0.0;        // end of the high-amplitude branch (n_plus)
  double eps2_up = 0.0;       // drive power where the low branch vanishes:
                              // the upward bifurcation threshold eps_B^2
  double eps2_retrap = 0.0;   // drive power where the high branch vanishes
};

// Branch endpoints n_pm = [2 delta -+ sqrt(delta^2 - 3 kappa^2/4)]/(3|K|).
// Throws std::domain_error when omega <= sqrt(3) (no bistability).
Spinodals spinodals(const JbaOperatingPoint& pt);

// Gamma = attempt * exp(-b (1 - eps^2/eps_B^2)^{3/2}), saturating at the
// attempt rate once the drive reaches the bifurcation threshold.
double escape_rate(const JbaOperatingPoint& pt, const EscapeModel& model, double eps);

// Closed-form S-curve p_B(P) = 1 - exp(-Gamma(eps(P)) t_S) over a sorted grid.
SCurveModel s_curve_analytic(const JbaOperatingPoint& pt, const EscapeModel& model,
                             const std::vector<double>& p_grid_db, double t_s_ns,
                             const DeviceParams& dev);

// Input-referred power to intracavity drive amplitude, eps = sqrt(kappa Phi)
// with Phi the incident photon flux for the one-port reflection geometry.
double drive_from_power(double p_db, const DeviceParams& dev, double f_drive_ghz);

// Inverse of drive_from_power evaluated at the upward bifurcation threshold.
double threshold_power(const JbaOperatingPoint& pt, const DeviceParams& dev);

}  // namespace jbasim
