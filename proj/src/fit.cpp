#include "jbasim/fit.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "jbasim/constants.hpp"

namespace jbasim {

double FitResult::value(const std::string& name) const {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return values[i];
  }
  throw std::out_of_range("FitResult: no parameter named " + name);
}

double FitResult::stderr_of(const std::string& name) const {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return stderrs[i];
  }
  throw std::out_of_range("FitResult: no parameter named " + name);
}

namespace {

struct LmProblem {
  // Fills residuals r and Jacobian J (rows = points, cols = params).
  virtual void eval(const Eigen::VectorXd& p, Eigen::VectorXd& r, Eigen::MatrixXd& j) const = 0;
  virtual ~LmProblem() = default;
};

struct LmOutcome {
  Eigen::VectorXd params;
  Eigen::VectorXd stderrs;
  double residual_norm = 0.0;
  bool converged = false;
};

LmOutcome levenberg_marquardt(const LmProblem& problem, Eigen::VectorXd p, long n_points,
                              bool errors_known) {
  const int m = static_cast<int>(p.size());
  Eigen::VectorXd r;
  Eigen::MatrixXd j;
  problem.eval(p, r, j);
  double cost = r.squaredNorm();

  double lambda = 1e-3;
  bool converged = false;
  int stalls = 0;
  for (int iter = 0; iter < 200; ++iter) {
    const Eigen::MatrixXd jtj = j.transpose() * j;
    const Eigen::VectorXd g = j.transpose() * r;

    Eigen::MatrixXd damped = jtj;
    for (int k = 0; k < m; ++k) {
      damped(k, k) += lambda * std::max(jtj(k, k), 1e-12);
    }
    const Eigen::VectorXd step = damped.ldlt().solve(-g);
    if (!step.allFinite()) break;

    Eigen::VectorXd trial = p + step;
    Eigen::VectorXd r_trial;
    Eigen::MatrixXd j_trial;
    problem.eval(trial, r_trial, j_trial);
    const double cost_trial = r_trial.squaredNorm();

    if (cost_trial < cost) {
      const double rel_step = step.norm() / (p.norm() + 1e-30);
      const double improvement = (cost - cost_trial) / std::max(cost, 1e-300);
      p = trial;
      r = r_trial;
      j = j_trial;
      cost = cost_trial;
      lambda = std::max(lambda * 0.3, 1e-12);
      stalls = improvement < 1e-12 ? stalls + 1 : 0;
      if (rel_step < 1e-9 || stalls >= 3) {
        converged = true;
        break;
      }
    } else {
      lambda *= 10.0;
      if (lambda > 1e12) {
        converged = true;  // stuck at the noise floor with no usable step
        break;
      }
    }
  }

  LmOutcome out;
  out.params = p;
  out.residual_norm = std::sqrt(cost);
  out.converged = converged;

  // Covariance from (J^T J)^{-1}; if the point errors were not supplied the
  // residual variance sets the scale.
  Eigen::MatrixXd jtj = j.transpose() * j;
  for (int k = 0; k < m; ++k) jtj(k, k) += 1e-30;
  const Eigen::MatrixXd cov = jtj.inverse();
  const double dof = std::max<long>(n_points - m, 1);
  const double scale = errors_known ? 1.0 : cost / dof;
  out.stderrs.resize(m);
  for (int k = 0; k < m; ++k) {
    out.stderrs(k) = std::sqrt(std::max(cov(k, k) * scale, 0.0));
  }
  return out;
}

void check_inputs(const std::vector<double>& x, const std::vector<double>& y,
                  const std::vector<double>& y_err, std::size_t min_points) {
  if (x.size() != y.size()) throw std::invalid_argument("fit: x and y sizes differ");
  if (!y_err.empty() && y_err.size() != y.size()) {
    throw std::invalid_argument("fit: y_err size differs from y");
  }
  if (x.size() < min_points) throw std::invalid_argument("fit: too few points");
}

double weight_at(const std::vector<double>& y_err, std::size_t i) {
  if (y_err.empty()) return 1.0;
  return 1.0 / std::max(y_err[i], 1e-12);
}

// Dense scan of the windowed projection amplitude; robust for the short,
// possibly non-uniform grids the protocols produce.
struct SpectralPeak {
  double freq = 0.0;
  double amp = 0.0;
  double phase = 0.0;
};

SpectralPeak spectral_peak(const std::vector<double>& x, const std::vector<double>& z) {
  const std::size_t n = x.size();
  const double span = x.back() - x.front();
  SpectralPeak best;
  if (span <= 0.0) return best;
  const int n_freq = static_cast<int>(4 * n);
  const double f_max = 0.5 * n / span;  // pseudo-Nyquist for the average spacing
  for (int k = 1; k <= n_freq; ++k) {
    const double f = f_max * k / n_freq;
    double cs = 0.0, sn = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      cs += z[i] * std::cos(kTwoPi * f * (x[i] - x.front()));
      sn += z[i] * std::sin(kTwoPi * f * (x[i] - x.front()));
    }
    const double amp = 2.0 * std::sqrt(cs * cs + sn * sn) / n;
    if (amp > best.amp) {
      best.amp = amp;
      best.freq = f;
      // z ~ A sin(theta + phi): the sine projection carries cos(phi).
      best.phase = std::atan2(cs, sn) - kTwoPi * f * x.front();
    }
  }
  return best;
}

struct DampedSineProblem final : LmProblem {
  const std::vector<double>&x, &y, &w;
  DampedSineProblem(const std::vector<double>& x_, const std::vector<double>& y_,
                    const std::vector<double>& w_)
      : x(x_), y(y_), w(w_) {}

  // p = (A, f, phi, log_tau, off)
  void eval(const Eigen::VectorXd& p, Eigen::VectorXd& r, Eigen::MatrixXd& j) const override {
    const std::size_t n = x.size();
    r.resize(n);
    j.resize(n, 5);
    const double a = p(0), f = p(1), phi = p(2), tau = std::exp(p(3)), off = p(4);
    for (std::size_t i = 0; i < n; ++i) {
      const double e = std::exp(-x[i] / tau);
      const double arg = kTwoPi * f * x[i] + phi;
      const double s = std::sin(arg), c = std::cos(arg);
      r(i) = (off + a * e * s - y[i]) * w[i];
      j(i, 0) = e * s * w[i];
      j(i, 1) = a * e * c * kTwoPi * x[i] * w[i];
      j(i, 2) = a * e * c * w[i];
      j(i, 3) = a * e * s * (x[i] / tau) * w[i];  // d/d(log tau)
      j(i, 4) = w[i];
    }
  }
};

struct ExponentialProblem final : LmProblem {
  const std::vector<double>&x, &y, &w;
  ExponentialProblem(const std::vector<double>& x_, const std::vector<double>& y_,
                     const std::vector<double>& w_)
      : x(x_), y(y_), w(w_) {}

  // p = (A, log_tau, off)
  void eval(const Eigen::VectorXd& p, Eigen::VectorXd& r, Eigen::MatrixXd& j) const override {
    const std::size_t n = x.size();
    r.resize(n);
    j.resize(n, 3);
    const double a = p(0), tau = std::exp(p(1)), off = p(2);
    for (std::size_t i = 0; i < n; ++i) {
      const double e = std::exp(-x[i] / tau);
      r(i) = (off + a * e - y[i]) * w[i];
      j(i, 0) = e * w[i];
      j(i, 1) = a * e * (x[i] / tau) * w[i];
      j(i, 2) = w[i];
    }
  }
};

}  // namespace

FitResult fit_damped_sine(const std::vector<double>& x, const std::vector<double>& y,
                          const std::vector<double>& y_err) {
  check_inputs(x, y, y_err, 10);
  const std::size_t n = x.size();
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) w[i] = weight_at(y_err, i);

  double mean = 0.0;
  for (double v : y) mean += v;
  mean /= n;
  std::vector<double> z(n);
  double spread = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    z[i] = y[i] - mean;
    spread = std::max(spread, std::abs(z[i]));
  }

  FitResult out;
  out.model = "damped_sine";
  out.names = {"amplitude", "frequency", "phase", "decay", "offset"};

  const double y_scale = std::max(std::abs(mean), spread);
  if (spread < std::max(1e-12, 1e-9 * y_scale)) {
    // Flat data: amplitude is zero and the frequency is unidentifiable.
    out.values = {0.0, 0.0, 0.0, std::numeric_limits<double>::infinity(), mean};
    out.stderrs = {0.0, 0.0, 0.0, 0.0, 0.0};
    out.converged = true;
    out.degenerate = true;
    return out;
  }

  const SpectralPeak peak = spectral_peak(x, z);
  const double span = x.back() - x.front();
  if (peak.freq * span < 1.5) {
    throw std::invalid_argument("fit_damped_sine: data span below 1.5 periods of the detected frequency");
  }

  Eigen::VectorXd p0(5);
  p0 << peak.amp, peak.freq, peak.phase, std::log(std::max(span, 1e-12)), mean;
  const DampedSineProblem problem(x, y, w);
  const LmOutcome lm = levenberg_marquardt(problem, p0, static_cast<long>(n), !y_err.empty());

  double amp = lm.params(0);
  double freq = lm.params(1);
  double phase = lm.params(2);
  const double tau = std::exp(lm.params(3));
  if (freq < 0.0) {  // canonical form: positive frequency, positive amplitude
    freq = -freq;
    phase = M_PI - phase;
  }
  if (amp < 0.0) {
    amp = -amp;
    phase += M_PI;
  }
  phase = std::remainder(phase, kTwoPi);

  out.values = {amp, freq, phase, tau, lm.params(4)};
  out.stderrs = {lm.stderrs(0), lm.stderrs(1), lm.stderrs(2), lm.stderrs(3) * tau,
                 lm.stderrs(4)};
  out.residual_norm = lm.residual_norm;
  out.converged = lm.converged;
  return out;
}

FitResult fit_exponential(const std::vector<double>& x, const std::vector<double>& y,
                          const std::vector<double>& y_err) {
  check_inputs(x, y, y_err, 4);
  const std::size_t n = x.size();
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) w[i] = weight_at(y_err, i);

  FitResult out;
  out.model = "exponential";
  out.names = {"amplitude", "decay", "offset"};

  // Tail mean approximates the offset; the head sets the amplitude.
  double tail = 0.0;
  const std::size_t n_tail = std::max<std::size_t>(n / 4, 1);
  for (std::size_t i = n - n_tail; i < n; ++i) tail += y[i];
  tail /= n_tail;
  const double a0 = y.front() - tail;

  double spread = 0.0;
  for (double v : y) spread = std::max(spread, std::abs(v - tail));
  if (spread < std::max(1e-12, 1e-9 * std::abs(tail)) || std::abs(a0) < 1e-3 * spread) {
    out.values = {0.0, std::numeric_limits<double>::infinity(), tail};
    out.stderrs = {0.0, 0.0, 0.0};
    out.converged = true;
    out.degenerate = true;  // nothing decays: tau is a sentinel
    return out;
  }

  // Half-amplitude crossing for the initial decay constant.
  const double span = x.back() - x.front();
  double tau0 = span / 2.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (std::abs(y[i] - tail) < 0.5 * std::abs(a0)) {
      tau0 = std::max((x[i] - x.front()) / std::log(2.0), span * 1e-3);
      break;
    }
  }

  Eigen::VectorXd p0(3);
  p0 << a0, std::log(tau0), tail;
  const ExponentialProblem problem(x, y, w);
  const LmOutcome lm = levenberg_marquardt(problem, p0, static_cast<long>(n), !y_err.empty());

  const double tau = std::exp(lm.params(1));
  out.values = {lm.params(0), tau, lm.params(2)};
  out.stderrs = {lm.stderrs(0), lm.stderrs(1) * tau, lm.stderrs(2)};
  out.residual_norm = lm.residual_norm;
  out.converged = lm.converged;
  if (tau > 1e3 * span || std::abs(out.values[0]) < 3.0 * out.stderrs[0]) {
    out.degenerate = true;  // decay not resolved within the window
    out.values[1] = std::numeric_limits<double>::infinity();
  }
  return out;
}

}  // namespace jbasim
