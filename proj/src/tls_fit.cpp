#include "jer/tls_fit.hpp"

#include "jer/constants.hpp"
#include "jer/error.hpp"
#include "jer/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>

namespace jer {

double thermal_factor(double f, double temperature) {
  if (temperature <= 0.0) return 1.0;
  return std::tanh(constants::planck * f / (2.0 * constants::boltzmann * temperature));
}

double eval_eq1(const Eq1Params& p, double n_p, double f, double temperature) {
  if (!(p.gamma0 >= 0) || !(p.n_c > 0) || !(p.alpha_exp > 0) || !(p.gamma_ext >= 0) || !(n_p >= 0)) {
    throw std::invalid_argument("eval_eq1: parameters out of range");
  }
  const double ratio = std::pow(n_p / p.n_c, p.alpha_exp);
  return p.gamma0 * thermal_factor(f, temperature) / std::sqrt(1.0 + ratio) + p.gamma_ext;
}

void PowerDependence::validate() const {
  if (!(f > 0)) throw DataError(device_id + ": resonance frequency must be > 0");
  if (points.size() < 6) throw DataError(device_id + ": fewer than 6 power points");
  double lo = std::numeric_limits<double>::infinity();
  double hi = 0.0;
  std::vector<double> n;
  for (const PowerPoint& p : points) {
    if (!(p.n_p > 0) || !(p.gamma > 0) || !(p.sigma > 0)) {
      throw DataError(device_id + ": photon numbers, Gamma and sigma must be > 0");
    }
    lo = std::min(lo, p.n_p);
    hi = std::max(hi, p.n_p);
    n.push_back(p.n_p);
  }
  std::sort(n.begin(), n.end());
  if (std::adjacent_find(n.begin(), n.end()) != n.end()) {
    throw DataError(device_id + ": repeated photon number");
  }
  if (hi / lo < 1e3) throw DataError(device_id + ": photon numbers span less than 3 decades");
}

namespace {

// Internal coordinates: [ln gamma0, ln n_c, t, q] with alpha = 2/(1+e^-t),
// gamma_ext = scale q^2. The pinned fit drops q.
struct Model {
  std::vector<PowerPoint> pts;
  double thermal;
  double scale;
  bool pinned;

  Eq1Params unpack(const Eigen::VectorXd& x) const {
    Eq1Params p;
    p.gamma0 = std::exp(x(0));
    p.n_c = std::exp(x(1));
    p.alpha_exp = 2.0 / (1.0 + std::exp(-x(2)));
    p.gamma_ext = pinned ? 0.0 : scale * x(3) * x(3);
    return p;
  }

  Eigen::VectorXd pack(const Eq1Params& p) const {
    Eigen::VectorXd x(pinned ? 3 : 4);
    const double a = std::clamp(p.alpha_exp / 2.0, 1e-9, 1.0 - 1e-9);
    x(0) = std::log(p.gamma0);
    x(1) = std::log(p.n_c);
    x(2) = std::log(a / (1.0 - a));
    if (!pinned) x(3) = std::sqrt(std::max(p.gamma_ext, 0.0) / scale);
    return x;
  }

  void residuals(const Eigen::VectorXd& x, Eigen::VectorXd& r) const {
    const Eq1Params p = unpack(x);
    for (std::size_t k = 0; k < pts.size(); ++k) {
      const double ratio = std::pow(pts[k].n_p / p.n_c, p.alpha_exp);
      const double g = p.gamma0 * thermal / std::sqrt(1.0 + ratio) + p.gamma_ext;
      r(static_cast<Eigen::Index>(k)) = (g - pts[k].gamma) / pts[k].sigma;
    }
  }

  void jacobian(const Eigen::VectorXd& x, Eigen::MatrixXd& j) const {
    const Eq1Params p = unpack(x);
    const double dalpha_dt = p.alpha_exp * (1.0 - 0.5 * p.alpha_exp);
    for (std::size_t k = 0; k < pts.size(); ++k) {
      const auto row = static_cast<Eigen::Index>(k);
      const double s = pts[k].sigma;
      const double log_ratio = std::log(pts[k].n_p / p.n_c);
      const double ratio = std::exp(p.alpha_exp * log_ratio);
      const double d = 1.0 + ratio;
      const double tls = p.gamma0 * thermal / std::sqrt(d);
      const double dtls_dratio = -0.5 * tls / d;
      j(row, 0) = tls / s;
      j(row, 1) = dtls_dratio * (-p.alpha_exp * ratio) / s;
      j(row, 2) = dtls_dratio * ratio * log_ratio * dalpha_dt / s;
      if (!pinned) j(row, 3) = 2.0 * scale * x(3) / s;
    }
  }

  // Jacobian of the weighted residuals in (gamma0, n_c, alpha[, gamma_ext]).
  Eigen::MatrixXd natural_jacobian(const Eq1Params& p) const {
    const int m = static_cast<int>(pts.size());
    Eigen::MatrixXd j(m, pinned ? 3 : 4);
    for (int k = 0; k < m; ++k) {
      const double s = pts[static_cast<std::size_t>(k)].sigma;
      const double n = pts[static_cast<std::size_t>(k)].n_p;
      const double log_ratio = std::log(n / p.n_c);
      const double ratio = std::exp(p.alpha_exp * log_ratio);
      const double d = 1.0 + ratio;
      const double base = thermal / std::sqrt(d);
      const double dtls_dratio = -0.5 * p.gamma0 * base / d;
      j(k, 0) = base / s;
      j(k, 1) = dtls_dratio * (-p.alpha_exp * ratio / p.n_c) / s;
      j(k, 2) = dtls_dratio * ratio * log_ratio / s;
      if (!pinned) j(k, 3) = 1.0 / s;
    }
    return j;
  }
};

struct Candidate {
  Eq1Params params;
  double chi2 = std::numeric_limits<double>::infinity();
  bool converged = false;
};

Candidate run_fit(const Model& model, const Eq1Params& start) {
  const int m = static_cast<int>(model.pts.size());
  auto res = [&](const Eigen::VectorXd& x, Eigen::VectorXd& r) { model.residuals(x, r); };
  auto jac = [&](const Eigen::VectorXd& x, Eigen::MatrixXd& j) { model.jacobian(x, j); };
  numerics::LmOptions opt;
  opt.max_evaluations = 600;
  opt.ftol = 1e-12;
  opt.xtol = 1e-12;
  const auto lm = numerics::levenberg_marquardt(m, res, jac, model.pack(start), opt);
  Candidate c;
  if (!lm.x.allFinite() || !std::isfinite(lm.cost)) return c;
  c.params = model.unpack(lm.x);
  c.chi2 = lm.cost;
  c.converged = lm.converged;
  return c;
}

Candidate multi_start(const Model& model) {
  double g_lo = model.pts.back().gamma;
  double g_hi = model.pts.front().gamma;
  for (const PowerPoint& p : model.pts) {
    g_lo = std::min(g_lo, p.gamma);
    g_hi = std::max(g_hi, p.gamma);
  }
  const double ext0 = model.pinned ? 0.0 : 0.5 * g_lo;
  const double g0 = std::max(g_hi - ext0, 0.1 * g_hi) / model.thermal;

  Candidate best;
  for (int k = 0; k < 8; ++k) {
    const double n_c = std::pow(10.0, -1.0 + k);
    const Candidate c = run_fit(model, {g0, n_c, 1.0, ext0});
    if (c.converged && c.chi2 < best.chi2) best = c;
  }
  return best;
}

double top_decade_decrease(const Eq1Params& p, double n_max, double f, double temperature) {
  const double upper = eval_eq1(p, n_max, f, temperature);
  const double lower = eval_eq1(p, n_max / 10.0, f, temperature);
  return (lower - upper) / lower;
}

bool rises_with_power(const std::vector<PowerPoint>& pts) {
  for (std::size_t i = 0; i < pts.size(); ++i) {
    for (std::size_t j = i + 1; j < pts.size(); ++j) {
      const double s = std::hypot(pts[i].sigma, pts[j].sigma);
      if (pts[j].gamma - pts[i].gamma > 3.0 * s) return true;
    }
  }
  return false;
}

}  // namespace

TlsFitResult fit_power_dependence(const PowerDependence& data, const TlsFitOptions& options) {
  data.validate();
  if (!(data.temperature >= 0)) throw DataError(data.device_id + ": temperature must be >= 0");

  Model model;
  model.pts = data.points;
  std::sort(model.pts.begin(), model.pts.end(),
            [](const PowerPoint& a, const PowerPoint& b) { return a.n_p < b.n_p; });
  model.thermal = thermal_factor(data.f, data.temperature);
  std::vector<double> gammas;
  for (const PowerPoint& p : model.pts) gammas.push_back(p.gamma);
  model.scale = numerics::median(gammas);
  model.pinned = false;

  TlsFitResult result;
  result.f = data.f;
  result.temperature = data.temperature;
  result.non_monotonic = rises_with_power(model.pts);
  const double n_max = model.pts.back().n_p;

  Candidate best = multi_start(model);
  if (best.converged) {
    result.top_decade_decrease = top_decade_decrease(best.params, n_max, data.f, data.temperature);
    result.unsaturated = result.top_decade_decrease > options.saturation_threshold;
  }
  // The pinned refit is always evaluated: an unresolved floor is forced to 0
  // whether or not the top decade still falls.
  {
    model.pinned = true;
    const Candidate pinned = multi_start(model);
    const bool ext_needed = best.converged && pinned.chi2 - best.chi2 >= options.pin_chi2_margin;
    if (pinned.converged && !ext_needed) {
      best = pinned;
    } else if (!best.converged) {
      std::ostringstream msg;
      msg << data.device_id << ": power-dependence fit failed on every start (best chi2 "
          << std::min(best.chi2, pinned.chi2) << ")";
      throw FitError(msg.str(), std::min(best.chi2, pinned.chi2));
    } else {
      model.pinned = false;
    }
  }

  result.ext_pinned = model.pinned;
  result.gamma0 = best.params.gamma0;
  result.n_c = best.params.n_c;
  result.alpha_exp = best.params.alpha_exp;
  result.gamma_ext = best.params.gamma_ext;
  result.residual_chi2 = best.chi2;
  result.dof = static_cast<int>(model.pts.size()) - (model.pinned ? 3 : 4);
  result.covariance = numerics::normal_covariance(model.natural_jacobian(best.params));

  if (options.bootstrap_samples > 0) {
    std::mt19937_64 rng(numerics::mix_seed(options.bootstrap_seed, numerics::fnv1a(data.device_id)));
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> lp;
    Model resampled = model;
    for (int b = 0; b < options.bootstrap_samples; ++b) {
      for (std::size_t k = 0; k < resampled.pts.size(); ++k) {
        const PowerPoint& p = model.pts[k];
        const double g = eval_eq1(best.params, p.n_p, data.f, data.temperature);
        resampled.pts[k].gamma = std::max(g + p.sigma * normal(rng), 1e-3 * g);
      }
      const Candidate c = run_fit(resampled, best.params);
      if (c.converged) lp.push_back(c.params.gamma0 * model.thermal + c.params.gamma_ext);
    }
    if (lp.size() >= 2) {
      double mean = 0.0;
      for (double v : lp) mean += v;
      mean /= static_cast<double>(lp.size());
      double var = 0.0;
      for (double v : lp) var += (v - mean) * (v - mean);
      result.bootstrap_gamma_lp_sigma = std::sqrt(var / static_cast<double>(lp.size() - 1));
    }
  }
  return result;
}

ValueWithError gamma_lp(const TlsFitResult& r) {
  const double th = thermal_factor(r.f, r.temperature);
  ValueWithError out;
  out.value = r.gamma0 * th + r.gamma_ext;
  if (r.bootstrap_gamma_lp_sigma > 0) {
    out.sigma = r.bootstrap_gamma_lp_sigma;
    return out;
  }
  const auto n = r.covariance.rows();
  if (n == 0) return out;
  Eigen::VectorXd g = Eigen::VectorXd::Zero(n);
  g(0) = th;
  if (n == 4) g(3) = 1.0;
  out.sigma = std::sqrt(std::max(0.0, g.dot(r.covariance * g)));
  return out;
}

}  // namespace jer
