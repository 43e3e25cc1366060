#pragma once

#include <array>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace jbasim {

struct ConvergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Static circuit constants. Frequencies in GHz, times in us, powers in dB
// referred to 1 mW at the fridge input.
struct DeviceParams {
  double f_c = 6.4535;      // bare cavity frequency (GHz)
  double q0 = 685.0;        // loaded quality factor
  double i_c = 0.72;        // junction critical current (uA), informational only
  double kerr_mhz = -1.15;  // Kerr shift per photon (MHz), negative = softening
  double g = 0.044;         // qubit-cavity coupling, 0-1 vacuum rate (GHz)
  double e_j_max = 21.0;    // maximum Josephson energy (GHz)
  double e_c = 1.2;         // charging energy per Cooper pair (GHz)
  double d = 0.0;           // SQUID junction asymmetry, 0 = symmetric
  double t1_int_us = 0.7;   // intrinsic relaxation time (us)
  double a_flux = 2e-5;     // 1/f flux noise amplitude at 1 Hz (Phi0)
  double t_n = 3.0;         // amplifier noise temperature (K)
  double atten_db = -77.0;  // line attenuation, fridge input to sample (dB)

  // Throws std::invalid_argument naming the offending field.
  void validate() const;

  // Cavity energy decay rate kappa = 2*pi*f_C/Q0 (rad/s).
  double kappa() const;
};

struct TransmonSpectrum {
  double e_j = 0.0;                 // Josephson energy used (GHz)
  double e_c = 0.0;                 // charging energy used (GHz)
  std::vector<double> levels;       // eigenfrequencies relative to ground (GHz)
  double f01 = 0.0;                 // levels[1] - levels[0]
  double f12 = 0.0;                 // levels[2] - levels[1]
  double alpha = 0.0;               // anharmonicity f12 - f01 (negative)
  std::vector<double> charge_elems; // |<i|n|i+1>| / |<0|n|1>|, elem[0] == 1
};

// Eigensystem of H = E_c n^2 - E_J cos(theta) in the Cooper-pair charge basis
// n in [-charge_cutoff, +charge_cutoff]. Verifies convergence by doubling the
// cutoff; throws ConvergenceError instead of silently truncating.
TransmonSpectrum diagonalize_transmon(double e_j, double e_c, int n_levels = 6,
                                      int charge_cutoff = 20);

// SQUID flux modulation, E_J(phi) = E_J_max sqrt(cos^2(pi phi) + d^2 sin^2(pi phi)).
// phi in units of Phi0; periodic with period 1.
double flux_tune(const DeviceParams& dev, double flux);

struct DispersiveMap {
  double delta = 0.0;                // qubit-cavity detuning f_C - f01 (GHz)
  std::array<double, 3> f_ci{};      // dressed cavity frequency per qubit state (GHz)
  double pull_01_mhz = 0.0;          // 2chi = f_C0 - f_C1 (MHz)
  double pull_02_mhz = 0.0;          // f_C0 - f_C2 (MHz)
  std::vector<double> stark;         // dressed f01 at n photons, n = 0..n_max (GHz)
};

// Dressed frequencies from the excitation-conserving transmon-cavity ladder,
// diagonalized per excitation manifold with the multilevel Jaynes-Cummings
// sqrt(i+1) coupling scaling. Requires the dispersive regime |f_C - f01| > g.
DispersiveMap dress_system(const DeviceParams& dev, const TransmonSpectrum& spectrum,
                           int n_photons_max);

// Inverse interpolation of the Stark map: measured f01 -> mean photon number.
// Linear between tabulated points; throws std::range_error outside the table.
double stark_invert(const DispersiveMap& map, double f01_shifted);

struct T1Result {
  double t1_us = 0.0;
  double t1_purcell_us = 0.0;
};

// Relaxation through the detuned cavity, Gamma_p = kappa (g/Delta)^2, combined
// with the intrinsic channel. Throws std::domain_error at Delta = 0.
T1Result purcell_t1(const DeviceParams& dev, double delta);

struct DephasingTime {
  double t_phi_us = 0.0;
  bool capped = false;  // true at sensitivity zeros (second-order limited)
};

inline constexpr double kTphiCapUs = 100.0;

// First-order 1/f flux-noise dephasing: the 1/e free-decay time solved
// self-consistently with a 1 Hz infrared cutoff. Flux sensitivity |df01/dphi|
// by Richardson-checked symmetric finite difference of f01_of_flux.
DephasingTime flux_dephasing_time(const DeviceParams& dev, double flux,
                                  const std::function<double(double)>& f01_of_flux);

// Convenience overload diagonalizing the transmon at each flux internally.
DephasingTime flux_dephasing_time(const DeviceParams& dev, double flux);

// T_phi^{-1} = T_2^{-1} - (2 T_1)^{-1}; returns +inf when relaxation-limited.
// Throws std::domain_error for T2 > 2 T1 beyond 1e-9 relative tolerance.
double extract_tphi(double t1_us, double t2_us);

// Smallest flux in [0, 0.5] where the transmon lands on f01_target (GHz).
double flux_for_f01(const DeviceParams& dev, double f01_target);

struct CoherenceBudget {
  double t1_us = 0.0;
  double t1_purcell_us = 0.0;
  double t2_us = 0.0;
  double t_phi_us = 0.0;
  double rate_21 = 0.0;  // 2->1 cascade rate (1/us)
  double rate_10 = 0.0;  // 1->0 cascade rate (1/us)
};

// Assembles relaxation, cascade and Ramsey times at a given detuning. The 2->1
// channel scales the Purcell rate by the photon matrix element squared at the
// f12 detuning and doubles the intrinsic rate (harmonic-limit scaling).
CoherenceBudget coherence_budget(const DeviceParams& dev, const TransmonSpectrum& spectrum,
                                 double delta, double t_phi_us);

}  // namespace jbasim
