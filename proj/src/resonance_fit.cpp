#include "jer/resonance_fit.hpp"

#include "jer/constants.hpp"
#include "jer/error.hpp"
#include "jer/numerics.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>
#include <stdexcept>

namespace jer {

using constants::pi;
using constants::two_pi;

void PowerSweepTrace::validate() const {
  if (freqs.size() != s21.size()) throw DataError("trace " + device_id + ": array length mismatch");
  if (freqs.size() < 50) throw DataError("trace " + device_id + ": fewer than 50 points");
  for (std::size_t k = 1; k < freqs.size(); ++k) {
    if (!(freqs[k] > freqs[k - 1])) {
      throw DataError("trace " + device_id + ": frequencies not strictly increasing");
    }
  }
  if (!(applied_power > 0)) throw DataError("trace " + device_id + ": applied power must be > 0");
  for (const cplx& z : s21) {
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) {
      throw DataError("trace " + device_id + ": non-finite S21 sample");
    }
  }
}

cplx notch_model(const NotchParameters& p, double f) {
  const cplx env = p.background.amplitude *
                   std::exp(cplx{0.0, p.background.phase - two_pi * f * p.background.delay});
  const cplx k = (p.q_l / p.q_c_mag) * std::exp(cplx{0.0, p.phi});
  const cplx d{1.0, 2.0 * p.q_l * (f / p.f_r - 1.0)};
  return env * (1.0 - k / d);
}

double ResonanceFit::q_c_real() const { return q_c_mag / std::cos(phi); }

Circle fit_circle(std::span<const cplx> points) {
  const auto n = static_cast<Eigen::Index>(points.size());
  if (n < 3) throw std::invalid_argument("fit_circle: need at least 3 points");
  cplx mean{0.0, 0.0};
  for (const cplx& z : points) mean += z;
  mean /= static_cast<double>(n);
  double scale = 0.0;
  for (const cplx& z : points) scale = std::max(scale, std::abs(z - mean));
  if (!(scale > 0)) throw std::invalid_argument("fit_circle: degenerate points");

  Eigen::MatrixXd a(n, 3);
  Eigen::VectorXd b(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const cplx z = (points[static_cast<std::size_t>(k)] - mean) / scale;
    a(k, 0) = z.real();
    a(k, 1) = z.imag();
    a(k, 2) = 1.0;
    b(k) = -std::norm(z);
  }
  const Eigen::Vector3d sol = a.colPivHouseholderQr().solve(b);
  const cplx centre{-0.5 * sol(0), -0.5 * sol(1)};
  const double r2 = std::norm(centre) - sol(2);
  if (!(r2 > 0)) throw std::invalid_argument("fit_circle: no real circle");
  return {mean + scale * centre, scale * std::sqrt(r2)};
}

namespace {

std::vector<double> unwrapped_phase(std::span<const cplx> z) {
  std::vector<double> out(z.size());
  double offset = 0.0;
  for (std::size_t k = 0; k < z.size(); ++k) {
    const double raw = std::arg(z[k]);
    if (k > 0) {
      const double prev = out[k - 1] - offset;
      double jump = raw - prev;
      if (jump > pi) offset -= two_pi;
      if (jump < -pi) offset += two_pi;
    }
    out[k] = raw + offset;
  }
  return out;
}

double wrap_angle(double a) {
  a = std::fmod(a + pi, two_pi);
  if (a <= 0) a += two_pi;
  return a - pi;
}

// Common slope, separate offsets, over the two outer wings.
double wing_delay(const PowerSweepTrace& t, std::size_t wing, double f_centre) {
  const std::size_t n = t.freqs.size();
  const auto phase = unwrapped_phase(t.s21);
  Eigen::MatrixXd a(static_cast<Eigen::Index>(2 * wing), 3);
  Eigen::VectorXd b(static_cast<Eigen::Index>(2 * wing));
  Eigen::Index row = 0;
  for (std::size_t k = 0; k < wing; ++k, ++row) {
    a.row(row) << t.freqs[k] - f_centre, 1.0, 0.0;
    b(row) = phase[k];
  }
  for (std::size_t k = n - wing; k < n; ++k, ++row) {
    a.row(row) << t.freqs[k] - f_centre, 0.0, 1.0;
    b(row) = phase[k];
  }
  const Eigen::Vector3d sol = a.colPivHouseholderQr().solve(b);
  return -sol(0) / two_pi;
}

std::vector<cplx> remove_delay(const PowerSweepTrace& t, double tau, double f_centre) {
  std::vector<cplx> out(t.s21.size());
  for (std::size_t k = 0; k < out.size(); ++k) {
    out[k] = t.s21[k] * std::exp(cplx{0.0, two_pi * (t.freqs[k] - f_centre) * tau});
  }
  return out;
}

double circle_residual(std::span<const cplx> z) {
  const Circle c = fit_circle(z);
  double sum = 0.0;
  for (const cplx& p : z) {
    const double d = std::abs(p - c.centre) - c.radius;
    sum += d * d;
  }
  return sum;
}

// First interpolated frequency at which y crosses `level`.
std::optional<double> crossing(std::span<const double> f, std::span<const double> y, double level) {
  for (std::size_t k = 1; k < y.size(); ++k) {
    const double a = y[k - 1] - level;
    const double b = y[k] - level;
    if (a == 0.0) return f[k - 1];
    if ((a < 0) != (b < 0)) {
      return f[k - 1] + (f[k] - f[k - 1]) * a / (a - b);
    }
  }
  return std::nullopt;
}

struct PhaseFit {
  double theta0;
  double q_l;
  double f_r;
};

PhaseFit fit_phase(std::span<const double> f, std::span<const double> theta, double span) {
  const double dir = theta.back() < theta.front() ? -1.0 : 1.0;
  const double mid = 0.5 * (theta.front() + theta.back());
  const double f_r0 = crossing(f, theta, mid).value_or(0.5 * (f.front() + f.back()));
  const auto lo = crossing(f, theta, mid - dir * 0.5 * pi);
  const auto hi = crossing(f, theta, mid + dir * 0.5 * pi);
  double width = (lo && hi) ? std::abs(*lo - *hi) : span / 10.0;
  if (!(width > 0)) width = span / 10.0;
  const double q_l0 = f_r0 / width;

  // theta(f) = theta0 + 2 dir atan(2 Q_l (f/f_r - 1)); x = [theta0, ln Q_l, (f_r - f_r0)/width]
  const auto n = static_cast<int>(f.size());
  auto unpack = [&](const Eigen::VectorXd& x) {
    return PhaseFit{x(0), std::exp(x(1)), f_r0 + width * x(2)};
  };
  auto residuals = [&](const Eigen::VectorXd& x, Eigen::VectorXd& r) {
    const PhaseFit p = unpack(x);
    for (int k = 0; k < n; ++k) {
      const double u = 2.0 * p.q_l * (f[k] / p.f_r - 1.0);
      r(k) = p.theta0 + 2.0 * dir * std::atan(u) - theta[k];
    }
  };
  auto jacobian = [&](const Eigen::VectorXd& x, Eigen::MatrixXd& j) {
    const PhaseFit p = unpack(x);
    for (int k = 0; k < n; ++k) {
      const double u = 2.0 * p.q_l * (f[k] / p.f_r - 1.0);
      const double g = 2.0 * dir / (1.0 + u * u);
      j(k, 0) = 1.0;
      j(k, 1) = g * u;  // Q_l du/dQ_l = u
      j(k, 2) = g * (-2.0 * p.q_l * f[k] / (p.f_r * p.f_r)) * width;
    }
  };
  Eigen::VectorXd x0(3);
  x0 << mid, std::log(q_l0), 0.0;
  const auto result = numerics::levenberg_marquardt(n, residuals, jacobian, x0);
  return unpack(result.x);
}

}  // namespace

ResonanceFit fit_notch(const PowerSweepTrace& trace, const NotchFitOptions& options) {
  trace.validate();
  const std::size_t n = trace.freqs.size();
  const std::size_t wing = std::max<std::size_t>(5, n / 10);
  const double f_lo = trace.freqs.front();
  const double f_hi = trace.freqs.back();
  const double span = f_hi - f_lo;
  const double f_centre = 0.5 * (f_lo + f_hi);

  std::vector<double> wing_mag;
  for (std::size_t k = 0; k < wing; ++k) wing_mag.push_back(std::abs(trace.s21[k]));
  for (std::size_t k = n - wing; k < n; ++k) wing_mag.push_back(std::abs(trace.s21[k]));
  const double baseline = numerics::median(wing_mag);
  double min_mag = std::abs(trace.s21.front());
  for (const cplx& z : trace.s21) min_mag = std::min(min_mag, std::abs(z));
  if (!(baseline > 0) || min_mag / baseline > options.no_dip_ratio) {
    throw DataError("trace " + trace.device_id + ": no resonance (no dip in |S21|)");
  }

  // Cable delay: wing slope, then refined on circle quality.
  const double tau_wing = wing_delay(trace, wing, f_centre);
  const double tau_range = 1.0 / (two_pi * span);
  const double tau = numerics::minimize_bracketed(
      [&](double t) { return circle_residual(remove_delay(trace, t, f_centre)); },
      tau_wing - tau_range, tau_wing + tau_range, 1e-5 * tau_range);
  const std::vector<cplx> z = remove_delay(trace, tau, f_centre);
  const Circle circle = fit_circle(z);

  std::vector<cplx> rel(n);
  for (std::size_t k = 0; k < n; ++k) rel[k] = z[k] - circle.centre;
  const auto theta = unwrapped_phase(rel);
  const PhaseFit phase = fit_phase(trace.freqs, theta, span);

  // Diameter correction.
  const cplx off_res = circle.centre + circle.radius * std::exp(cplx{0.0, phase.theta0 + pi});
  const cplx centre_n = circle.centre / off_res;
  const double radius_n = circle.radius / std::abs(off_res);
  const double q_c0 = phase.q_l / (2.0 * radius_n);
  const double phi0 = std::arg(1.0 - centre_n);

  // Joint refinement. x = [ln a, alpha', (tau - tau0) 2 pi span, (f_r - f_r0)/lw,
  // ln Q_l, ln Q_c, phi]; alpha' is the phase referred to the window centre.
  const double lw = phase.f_r / phase.q_l;
  const double f_r0 = phase.f_r;
  struct Unpacked {
    double a, alpha, tau, f_r, q_l, q_c, phi;
  };
  auto unpack = [&](const Eigen::VectorXd& x) {
    return Unpacked{std::exp(x(0)), x(1), tau + x(2) / (two_pi * span), f_r0 + lw * x(3),
                    std::exp(x(4)), std::exp(x(5)), x(6)};
  };
  const int m = static_cast<int>(2 * n);
  auto residuals = [&](const Eigen::VectorXd& x, Eigen::VectorXd& r) {
    const Unpacked p = unpack(x);
    const cplx k_ = (p.q_l / p.q_c) * std::exp(cplx{0.0, p.phi});
    for (std::size_t k = 0; k < n; ++k) {
      const double f = trace.freqs[k];
      const cplx env = p.a * std::exp(cplx{0.0, p.alpha - two_pi * (f - f_centre) * p.tau});
      const cplx d{1.0, 2.0 * p.q_l * (f / p.f_r - 1.0)};
      const cplx s = env * (1.0 - k_ / d) - trace.s21[k];
      r(static_cast<Eigen::Index>(2 * k)) = s.real();
      r(static_cast<Eigen::Index>(2 * k + 1)) = s.imag();
    }
  };
  auto jacobian = [&](const Eigen::VectorXd& x, Eigen::MatrixXd& j) {
    const Unpacked p = unpack(x);
    const cplx k_ = (p.q_l / p.q_c) * std::exp(cplx{0.0, p.phi});
    const cplx jj{0.0, 1.0};
    for (std::size_t k = 0; k < n; ++k) {
      const double f = trace.freqs[k];
      const cplx env = p.a * std::exp(cplx{0.0, p.alpha - two_pi * (f - f_centre) * p.tau});
      const cplx d{1.0, 2.0 * p.q_l * (f / p.f_r - 1.0)};
      const cplx s = env * (1.0 - k_ / d);
      const cplx cols[7] = {
          s,
          jj * s,
          -jj * ((f - f_centre) / span) * s,
          env * (k_ / (d * d)) * cplx{0.0, -2.0 * p.q_l * f / (p.f_r * p.f_r)} * lw,
          env * (-k_ / (d * d)),
          env * (k_ / d),
          env * (-jj * k_ / d),
      };
      for (int c = 0; c < 7; ++c) {
        j(static_cast<Eigen::Index>(2 * k), c) = cols[c].real();
        j(static_cast<Eigen::Index>(2 * k + 1), c) = cols[c].imag();
      }
    }
  };

  Eigen::VectorXd x0(7);
  x0 << std::log(std::abs(off_res)), std::arg(off_res), 0.0, 0.0, std::log(phase.q_l),
      std::log(q_c0), phi0;
  numerics::LmOptions lm_options;
  lm_options.max_evaluations = options.max_evaluations;
  const auto result = numerics::levenberg_marquardt(m, residuals, jacobian, x0, lm_options);
  if (!result.converged) {
    std::ostringstream msg;
    msg << "trace " << trace.device_id << ": notch fit did not converge (residual "
        << std::sqrt(result.cost / m) << ")";
    throw FitError(msg.str(), std::sqrt(result.cost / m));
  }

  const Unpacked p = unpack(result.x);
  ResonanceFit fit;
  fit.f_r = p.f_r;
  fit.q_l = p.q_l;
  fit.q_c_mag = p.q_c;
  fit.phi = wrap_angle(p.phi);
  fit.gamma = 1.0 / p.q_l - std::cos(p.phi) / p.q_c;
  fit.background = {p.a, wrap_angle(p.alpha + two_pi * f_centre * p.tau), p.tau};
  fit.residual_rms = std::sqrt(result.cost / m) / p.a;

  Eigen::MatrixXd jac(m, 7);
  jacobian(result.x, jac);
  const double sigma2 = result.cost / std::max(1, m - 7);
  const Eigen::MatrixXd cov = sigma2 * numerics::normal_covariance(jac);
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(7);
  grad(4) = -1.0 / p.q_l;
  grad(5) = std::cos(p.phi) / p.q_c;
  grad(6) = std::sin(p.phi) / p.q_c;
  fit.gamma_sigma = std::sqrt(std::max(0.0, grad.dot(cov * grad)));
  fit.f_r_sigma = lw * std::sqrt(std::max(0.0, cov(3, 3)));
  fit.q_l_sigma = p.q_l * std::sqrt(std::max(0.0, cov(4, 4)));
  fit.flagged = fit.residual_rms > options.residual_flag || span < 5.0 * p.f_r / p.q_l;

  if (!(fit.gamma >= 0)) {
    std::ostringstream msg;
    msg << "trace " << trace.device_id << ": negative internal loss 1/Q_i = " << fit.gamma;
    throw FitError(msg.str(), fit.residual_rms);
  }
  fit.q_i = 1.0 / fit.gamma;
  if (!(fit.f_r >= f_lo && fit.f_r <= f_hi)) {
    throw FitError("trace " + trace.device_id + ": fitted resonance outside the window",
                   fit.residual_rms);
  }
  return fit;
}

double photon_number(double f_r, double q_l, double q_c, double applied_power) {
  if (!(f_r > 0) || !(q_l > 0) || !(q_c > 0) || !(applied_power > 0)) {
    throw std::invalid_argument("photon_number: arguments must be > 0");
  }
  if (q_l > q_c * (1.0 + 1e-6)) {
    throw DataError("photon_number: Q_l exceeds Q_c");
  }
  const double omega = two_pi * f_r;
  return 2.0 * q_l * q_l * applied_power / (q_c * constants::hbar * omega * omega);
}

double photon_number(const ResonanceFit& fit, double applied_power) {
  return photon_number(fit.f_r, fit.q_l, fit.q_c_real(), applied_power);
}

double dbm_to_watts(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }

double watts_to_dbm(double watts) { return 10.0 * std::log10(watts) + 30.0; }

}  // namespace jer
