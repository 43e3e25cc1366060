#include "jbasim/jba.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "jbasim/constants.hpp"

namespace jbasim {

namespace {

// Real roots of u^3 + a2 u^2 + a1 u + a0, Newton-polished.
std::vector<double> cubic_real_roots(double a2, double a1, double a0) {
  // Depressed form t^3 + p t + q with u = t - a2/3.
  const double shift = a2 / 3.0;
  const double p = a1 - a2 * a2 / 3.0;
  const double q = 2.0 * a2 * a2 * a2 / 27.0 - a2 * a1 / 3.0 + a0;

  std::vector<double> roots;
  const double disc = 0.25 * q * q + p * p * p / 27.0;
  // Near a double root the discriminant sits at rounding level; route those
  // through the trigonometric branch so the degenerate pair is kept.
  const double disc_scale = 0.25 * q * q + std::abs(p * p * p) / 27.0;
  if (disc > 1e-10 * disc_scale) {
    const double s = std::sqrt(disc);
    const double c1 = std::cbrt(-0.5 * q + s);
    const double c2 = std::cbrt(-0.5 * q - s);
    roots.push_back(c1 + c2 - shift);
  } else {
    // Three real roots (trigonometric form); p <= 0 here.
    const double m = 2.0 * std::sqrt(std::max(-p / 3.0, 0.0));
    double arg = 0.0;
    if (m > 0.0) {
      arg = std::clamp(3.0 * q / (p * m), -1.0, 1.0);
    }
    const double theta = std::acos(arg) / 3.0;
    for (int k = 0; k < 3; ++k) {
      roots.push_back(m * std::cos(theta - kTwoPi * k / 3.0) - shift);
    }
  }

  auto poly = [&](double u) { return ((u + a2) * u + a1) * u + a0; };
  auto dpoly = [&](double u) { return (3.0 * u + 2.0 * a2) * u + a1; };
  for (double& u : roots) {
    for (int it = 0; it < 3; ++it) {
      const double d = dpoly(u);
      if (d == 0.0) break;
      const double step = poly(u) / d;
      // Keep Newton local; near a double root the step is ill-conditioned.
      if (!std::isfinite(step) || std::abs(step) > 0.1 * (1.0 + std::abs(u))) break;
      u -= step;
    }
  }
  std::sort(roots.begin(), roots.end());
  return roots;
}

}  // namespace

bool JbaOperatingPoint::bistable() const { return omega() > kSqrt3; }

void JbaOperatingPoint::validate() const {
  if (!(kappa > 0)) throw std::invalid_argument("JbaOperatingPoint: kappa must be > 0");
  if (!(kerr < 0)) throw std::invalid_argument("JbaOperatingPoint: kerr must be negative");
}

JbaOperatingPoint JbaOperatingPoint::from_device(const DeviceParams& dev, double f_ci_ghz,
                                                 double f_drive_ghz) {
  JbaOperatingPoint pt;
  pt.f_drive = f_drive_ghz;
  pt.delta = ghz_to_rad_s(f_ci_ghz - f_drive_ghz);
  pt.kappa = dev.kappa();
  pt.kerr = mhz_to_rad_s(dev.kerr_mhz);
  pt.validate();
  return pt;
}

std::vector<double> steady_states(const JbaOperatingPoint& pt, double eps) {
  if (!(eps >= 0)) throw std::invalid_argument("steady_states: drive amplitude must be >= 0");
  pt.validate();
  const double k_abs = std::abs(pt.kerr);
  const double omega = pt.omega();

  // Reduced variables u = |K| n / kappa, beta = eps^2 |K| / kappa^3 keep the
  // cubic O(1): u^3 - Omega u^2 + (Omega^2 + 1)/4 u - beta = 0.
  const double beta = eps * eps * k_abs / (pt.kappa * pt.kappa * pt.kappa);
  if (beta == 0.0) return {0.0};

  std::vector<double> u = cubic_real_roots(-omega, (omega * omega + 1.0) / 4.0, -beta);

  // The cubic has no negative roots; clip float noise and merge the pair that
  // coalesces at a spinodal.
  std::vector<double> out;
  for (double v : u) {
    if (v < 0.0) v = 0.0;
    if (!out.empty() && std::abs(v - out.back()) <= 3e-6 * std::max(1.0, std::abs(v))) {
      continue;
    }
    out.push_back(v);
  }
  for (double& v : out) v *= pt.kappa / k_abs;
  return out;
}

Spinodals spinodals(const JbaOperatingPoint& pt) {
  pt.validate();
  if (!pt.bistable()) {
    std::ostringstream msg;
    msg << "spinodals: no bistability, reduced detuning 2*delta/kappa = " << pt.omega()
        << " <= sqrt(3)";
    throw std::domain_error(msg.str());
  }
  const double k_abs = std::abs(pt.kerr);
  const double disc = pt.delta * pt.delta - 0.75 * pt.kappa * pt.kappa;
  const double root = std::sqrt(std::max(disc, 0.0));

  auto eps2_at = [&](double n) {
    const double det = pt.delta - k_abs * n;
    return (det * det + 0.25 * pt.kappa * pt.kappa) * n;
  };

  Spinodals s;
  s.n_low = (2.0 * pt.delta - root) / (3.0 * k_abs);
  s.n_high = (2.0 * pt.delta + root) / (3.0 * k_abs);
  s.eps2_up = eps2_at(s.n_low);
  s.eps2_retrap = eps2_at(s.n_high);
  return s;
}

double escape_rate(const JbaOperatingPoint& pt, const EscapeModel& model, double eps) {
  if (!(eps >= 0)) throw std::domain_error("escape_rate: drive amplitude must be >= 0");
  if (!(model.attempt_rate_hz > 0)) throw std::invalid_argument("escape_rate: attempt rate must be > 0");
  if (!(model.barrier_scale > 0)) throw std::invalid_argument("escape_rate: barrier scale must be > 0");
  const Spinodals s = spinodals(pt);  // enforces bistability
  const double x = eps * eps / s.eps2_up;
  if (x >= 1.0) return model.attempt_rate_hz;  // barrier gone: deterministic switching
  return model.attempt_rate_hz *
         std::exp(-model.barrier_scale * std::pow(1.0 - x, EscapeModel::kExponent));
}

SCurveModel s_curve_analytic(const JbaOperatingPoint& pt, const EscapeModel& model,
                             const std::vector<double>& p_grid_db, double t_s_ns,
                             const DeviceParams& dev) {
  if (!std::is_sorted(p_grid_db.begin(), p_grid_db.end())) {
    throw std::invalid_argument("s_curve_analytic: power grid must be sorted");
  }
  SCurveModel curve;
  curve.power_db = p_grid_db;
  curve.t_s_ns = t_s_ns;
  curve.p_b.reserve(p_grid_db.size());
  curve.stderr_pb.assign(p_grid_db.size(), 0.0);
  for (double p_db : p_grid_db) {
    const double eps = drive_from_power(p_db, dev, pt.f_drive);
    const double gamma = escape_rate(pt, model, eps);
    curve.p_b.push_back(-std::expm1(-gamma * t_s_ns * 1e-9));
  }
  return curve;
}

double drive_from_power(double p_db, const DeviceParams& dev, double f_drive_ghz) {
  const double p_sample_w = 1e-3 * db_to_mw(p_db + dev.atten_db);
  const double photon_flux = p_sample_w / (kPlanck * f_drive_ghz * 1e9);
  return std::sqrt(dev.kappa() * photon_flux);
}

double threshold_power(const JbaOperatingPoint& pt, const DeviceParams& dev) {
  const Spinodals s = spinodals(pt);
  const double photon_flux = s.eps2_up / dev.kappa();
  const double p_sample_w = photon_flux * kPlanck * pt.f_drive * 1e9;
  return mw_to_db(p_sample_w * 1e3) - dev.atten_db;
}

}  // namespace jbasim
