#include "jbasim/device.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "jbasim/constants.hpp"

namespace jbasim {

namespace {

[[noreturn]] void field_error(const char* field, const std::string& why) {
  throw std::invalid_argument(std::string("DeviceParams.") + field + ": " + why);
}

struct ChargeBasisSolution {
  std::vector<double> levels;        // relative to ground (GHz)
  std::vector<double> charge_elems;  // normalized |<i|n|i+1>|
};

// Dense diagonalization of H = E_c n^2 - E_J cos(theta), n in [-cutoff, cutoff].
ChargeBasisSolution solve_charge_basis(double e_j, double e_c, int cutoff, int n_levels) {
  const int dim = 2 * cutoff + 1;
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(dim, dim);
  for (int k = 0; k < dim; ++k) {
    const double n = k - cutoff;
    h(k, k) = e_c * n * n;
    if (k + 1 < dim) {
      h(k, k + 1) = -0.5 * e_j;  // cos(theta) hops one Cooper pair
      h(k + 1, k) = -0.5 * e_j;
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(h);
  if (solver.info() != Eigen::Success) {
    throw ConvergenceError("transmon eigensolver failed");
  }

  ChargeBasisSolution out;
  out.levels.resize(n_levels);
  const double ground = solver.eigenvalues()(0);
  for (int i = 0; i < n_levels; ++i) {
    out.levels[i] = solver.eigenvalues()(i) - ground;
  }

  // <i|n|i+1> with n diagonal in this basis.
  auto charge_element = [&](int i, int j) {
    double acc = 0.0;
    for (int k = 0; k < dim; ++k) {
      acc += (k - cutoff) * solver.eigenvectors()(k, i) * solver.eigenvectors()(k, j);
    }
    return std::abs(acc);
  };
  const double ref = charge_element(0, 1);
  out.charge_elems.resize(n_levels - 1);
  for (int i = 0; i + 1 < n_levels; ++i) {
    out.charge_elems[i] = charge_element(i, i + 1) / ref;
  }
  return out;
}

}  // namespace

void DeviceParams::validate() const {
  if (!(f_c > 0)) field_error("f_c", "cavity frequency must be > 0");
  if (!(q0 > 1)) field_error("q0", "quality factor must be > 1");
  if (!(g > 0)) field_error("g", "coupling must be > 0");
  if (!(e_j_max > e_c)) field_error("e_j_max", "requires E_J_max > E_c");
  if (!(e_c > 0)) field_error("e_c", "charging energy must be > 0");
  if (!(kerr_mhz < 0)) field_error("kerr_mhz", "Kerr must be negative (softening)");
  if (!(t1_int_us > 0)) field_error("t1_int_us", "intrinsic T1 must be > 0");
  if (!(a_flux >= 0)) field_error("a_flux", "flux noise amplitude must be >= 0");
  if (!(d >= 0)) field_error("d", "SQUID asymmetry must be >= 0");
  if (!(t_n >= 0)) field_error("t_n", "noise temperature must be >= 0");
}

double DeviceParams::kappa() const { return kTwoPi * f_c * 1e9 / q0; }

TransmonSpectrum diagonalize_transmon(double e_j, double e_c, int n_levels, int charge_cutoff) {
  if (!(e_j > 0)) throw std::invalid_argument("diagonalize_transmon: E_J must be > 0");
  if (!(e_c > 0)) throw std::invalid_argument("diagonalize_transmon: E_c must be > 0");
  if (charge_cutoff < 10) throw std::invalid_argument("diagonalize_transmon: charge_cutoff must be >= 10");
  if (n_levels < 4) throw std::invalid_argument("diagonalize_transmon: need at least 4 levels");
  if (n_levels > charge_cutoff) {
    throw std::invalid_argument("diagonalize_transmon: n_levels must not exceed charge_cutoff");
  }

  const ChargeBasisSolution sol = solve_charge_basis(e_j, e_c, charge_cutoff, n_levels);
  const ChargeBasisSolution check = solve_charge_basis(e_j, e_c, 2 * charge_cutoff, n_levels);
  const double f01 = sol.levels[1];
  const double rel = std::abs(check.levels[1] - f01) / std::abs(check.levels[1]);
  if (rel >= 1e-6) {
    std::ostringstream msg;
    msg << "diagonalize_transmon: f01 not converged at charge_cutoff=" << charge_cutoff
        << " (doubling shifts f01 by " << rel << " relative)";
    throw ConvergenceError(msg.str());
  }

  TransmonSpectrum out;
  out.e_j = e_j;
  out.e_c = e_c;
  out.levels = sol.levels;
  out.charge_elems = sol.charge_elems;
  out.f01 = sol.levels[1];
  out.f12 = sol.levels[2] - sol.levels[1];
  out.alpha = out.f12 - out.f01;
  return out;
}

double flux_tune(const DeviceParams& dev, double flux) {
  const double c = std::cos(M_PI * flux);
  const double s = std::sin(M_PI * flux);
  return dev.e_j_max * std::sqrt(c * c + dev.d * dev.d * s * s);
}

namespace {

// Dressed energies of the excitation-conserving qubit-cavity ladder. The
// Hamiltonian block for M total excitations couples (i, M-i) to (i+1, M-i-1)
// with strength g sqrt(i+1) sqrt(M-i), the multilevel Jaynes-Cummings ladder
// scaling (the transmon's exact normalized charge elements sit within 5% of
// it). Bare energies within a block are non-degenerate in the dispersive
// regime, so dressed levels inherit labels by energy order.
class DressedLadder {
 public:
  DressedLadder(const DeviceParams& dev, const TransmonSpectrum& sp, int n_transmon)
      : dev_(dev), sp_(sp), n_t_(n_transmon) {}

  // E(i, n) in GHz, absolute.
  double energy(int i, int n) const {
    const int m = i + n;
    const int size = std::min(n_t_, m + 1);
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(size, size);
    std::vector<std::pair<double, int>> bare(size);  // (bare energy, transmon index)
    for (int j = 0; j < size; ++j) {
      const double e = sp_.levels[j] + (m - j) * dev_.f_c;
      h(j, j) = e;
      bare[j] = {e, j};
      if (j + 1 < size) {
        const double v = dev_.g * std::sqrt(double(j + 1)) * std::sqrt(double(m - j));
        h(j, j + 1) = v;
        h(j + 1, j) = v;
      }
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(h);
    std::sort(bare.begin(), bare.end());
    for (int r = 0; r < size; ++r) {
      if (bare[r].second == i) return solver.eigenvalues()(r);
    }
    throw std::logic_error("dressed ladder: label lookup failed");
  }

 private:
  const DeviceParams& dev_;
  const TransmonSpectrum& sp_;
  int n_t_;
};

double pull_from_ladder(const DressedLadder& ladder, int i) {
  return (ladder.energy(0, 1) - ladder.energy(0, 0)) -
         (ladder.energy(i, 1) - ladder.energy(i, 0));
}

}  // namespace

DispersiveMap dress_system(const DeviceParams& dev, const TransmonSpectrum& sp,
                           int n_photons_max) {
  if (n_photons_max < 1) throw std::invalid_argument("dress_system: n_photons_max must be >= 1");
  if (sp.levels.size() < 5) throw std::invalid_argument("dress_system: need >= 5 transmon levels");
  const double delta = dev.f_c - sp.f01;
  if (!(std::abs(delta) > dev.g)) {
    std::ostringstream msg;
    msg << "dress_system: dispersive precondition violated, |f_C - f01| = "
        << std::abs(delta) << " GHz <= g = " << dev.g
        << " GHz (qubit-cavity near-degeneracy)";
    throw std::domain_error(msg.str());
  }

  const int n_t = static_cast<int>(std::min<std::size_t>(sp.levels.size(), 6));
  DressedLadder ladder(dev, sp, n_t);

  // Transmon-ladder truncation check: removing the deepest level must not move
  // the pull.
  {
    DressedLadder shallow(dev, sp, n_t - 1);
    const double p_full = pull_from_ladder(ladder, 1);
    const double p_shallow = pull_from_ladder(shallow, 1);
    const double scale = std::max(std::abs(p_full), 1e-12);
    if (std::abs(p_full - p_shallow) / scale >= 1e-3) {
      throw ConvergenceError("dress_system: cavity pull not converged in transmon level count");
    }
  }

  DispersiveMap map;
  map.delta = delta;
  for (int i = 0; i < 3; ++i) {
    map.f_ci[i] = ladder.energy(i, 1) - ladder.energy(i, 0);
  }
  map.pull_01_mhz = (map.f_ci[0] - map.f_ci[1]) * 1e3;
  map.pull_02_mhz = (map.f_ci[0] - map.f_ci[2]) * 1e3;

  map.stark.resize(n_photons_max + 1);
  for (int n = 0; n <= n_photons_max; ++n) {
    map.stark[n] = ladder.energy(1, n) - ladder.energy(0, n);
  }
  for (int n = 0; n < n_photons_max; ++n) {
    if (map.stark[n + 1] > map.stark[n] + 1e-12) {
      throw ConvergenceError("dress_system: Stark map lost monotonicity inside the tabulated range");
    }
  }
  return map;
}

double stark_invert(const DispersiveMap& map, double f01_shifted) {
  if (map.stark.size() < 2) throw std::invalid_argument("stark_invert: Stark map too short");
  const double hi = map.stark.front();  // f01 decreases with n
  const double lo = map.stark.back();
  if (f01_shifted > hi + 1e-12 || f01_shifted < lo - 1e-12) {
    std::ostringstream msg;
    msg << "stark_invert: f01 = " << f01_shifted << " GHz outside the tabulated Stark range ["
        << lo << ", " << hi << "]";
    throw std::range_error(msg.str());
  }
  f01_shifted = std::clamp(f01_shifted, lo, hi);
  for (std::size_t n = 0; n + 1 < map.stark.size(); ++n) {
    const double a = map.stark[n];
    const double b = map.stark[n + 1];
    if (f01_shifted <= a + 1e-15 && f01_shifted >= b - 1e-15) {
      if (a == b) return static_cast<double>(n);
      return n + (a - f01_shifted) / (a - b);
    }
  }
  return static_cast<double>(map.stark.size() - 1);
}

T1Result purcell_t1(const DeviceParams& dev, double delta) {
  if (delta == 0.0) throw std::domain_error("purcell_t1: Delta = 0 (qubit on cavity resonance)");
  const double ratio = dev.g / delta;
  const double gamma_p = dev.kappa() * ratio * ratio;       // 1/s
  const double gamma_int = 1.0 / (dev.t1_int_us * 1e-6);    // 1/s
  T1Result out;
  out.t1_purcell_us = 1e6 / gamma_p;
  out.t1_us = 1e6 / (gamma_p + gamma_int);
  return out;
}

DephasingTime flux_dephasing_time(const DeviceParams& dev, double flux,
                                  const std::function<double(double)>& f01_of_flux) {
  const DephasingTime capped{kTphiCapUs, true};
  if (dev.a_flux <= 0.0) return capped;

  const double h = 1e-4;
  const double d1 = (f01_of_flux(flux + h) - f01_of_flux(flux - h)) / (2 * h);
  const double d2 = (f01_of_flux(flux + h / 2) - f01_of_flux(flux - h / 2)) / h;
  double sens = std::abs((4.0 * d2 - d1) / 3.0);  // Richardson-extrapolated, GHz/Phi0
  if (std::abs(d1 - d2) > 0.25 * std::max(std::abs(d2), 1e-9)) {
    // Strong curvature relative to slope: treat as a sensitivity zero.
    sens = std::min(sens, std::abs(d2));
  }
  const double sens_hz = sens * 1e9;
  if (sens_hz * dev.a_flux < 1.0) return capped;  // slower than any lab timescale

  // 1/e time of exp[-(t Gamma(t))^...] with the logarithmic 1/f factor,
  // Gamma(t) = A |df01/dphi| sqrt(2 ln(1/(2 pi f_ir t))), f_ir = 1 Hz.
  const double f_ir = 1.0;
  const double cap_s = kTphiCapUs * 1e-6;
  double t = 1e-6;
  for (int iter = 0; iter < 200; ++iter) {
    const double log_arg = 1.0 / (kTwoPi * f_ir * t);
    if (log_arg <= 1.0) return capped;
    const double gamma = dev.a_flux * sens_hz * std::sqrt(2.0 * std::log(log_arg));
    double t_new = 1.0 / gamma;
    if (t_new >= cap_s) return capped;
    if (std::abs(t_new - t) <= 1e-6 * t_new) {
      return {t_new * 1e6, false};
    }
    t = t_new;
  }
  throw ConvergenceError("flux_dephasing_time: fixed point did not converge");
}

DephasingTime flux_dephasing_time(const DeviceParams& dev, double flux) {
  auto f01_at = [&dev](double phi) {
    return diagonalize_transmon(flux_tune(dev, phi), dev.e_c).f01;
  };
  return flux_dephasing_time(dev, flux, f01_at);
}

double extract_tphi(double t1_us, double t2_us) {
  if (!(t1_us > 0)) throw std::domain_error("extract_tphi: T1 must be > 0");
  if (!(t2_us > 0)) throw std::domain_error("extract_tphi: T2 must be > 0");
  if (t2_us > 2.0 * t1_us * (1.0 + 1e-9)) {
    std::ostringstream msg;
    msg << "extract_tphi: unphysical input, T2 = " << t2_us << " us exceeds 2*T1 = "
        << 2.0 * t1_us << " us";
    throw std::domain_error(msg.str());
  }
  const double inv = 1.0 / t2_us - 1.0 / (2.0 * t1_us);
  if (inv <= 0.0) return std::numeric_limits<double>::infinity();
  return 1.0 / inv;
}

double flux_for_f01(const DeviceParams& dev, double f01_target) {
  auto f01_at = [&dev](double phi) {
    return diagonalize_transmon(flux_tune(dev, phi), dev.e_c).f01;
  };
  double lo = 0.0, hi = 0.499;
  const double f_lo = f01_at(lo);
  const double f_hi = f01_at(hi);
  if (f01_target > f_lo || f01_target < f_hi) {
    std::ostringstream msg;
    msg << "flux_for_f01: target " << f01_target << " GHz outside the tunable range ["
        << f_hi << ", " << f_lo << "]";
    throw std::invalid_argument(msg.str());
  }
  // f01 decreases monotonically with flux on [0, 1/2].
  for (int iter = 0; iter < 60; ++iter) {
    const double mid = 0.5 * (lo + hi);
    if (f01_at(mid) > f01_target) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

CoherenceBudget coherence_budget(const DeviceParams& dev, const TransmonSpectrum& sp,
                                 double delta, double t_phi_us) {
  CoherenceBudget out;
  const T1Result t1 = purcell_t1(dev, delta);
  out.t1_us = t1.t1_us;
  out.t1_purcell_us = t1.t1_purcell_us;
  out.t_phi_us = t_phi_us;
  out.rate_10 = 1.0 / t1.t1_us;

  // The 1->2 charge element squared doubles the emission rate (harmonic
  // limit); the photon leaves at f12, i.e. detuned by Delta + |alpha|.
  const double delta_12 = std::abs(delta) + std::abs(sp.alpha);
  const double ratio = dev.g / delta_12;
  const double c2 = sp.charge_elems.size() > 1 ? sp.charge_elems[1] * sp.charge_elems[1] : 2.0;
  const double gamma_p21 = dev.kappa() * c2 * ratio * ratio;     // 1/s
  const double gamma_int21 = c2 / (dev.t1_int_us * 1e-6);
  out.rate_21 = (gamma_p21 + gamma_int21) * 1e-6;

  out.t2_us = 1.0 / (0.5 / out.t1_us + 1.0 / t_phi_us);
  return out;
}

}  // namespace jbasim
