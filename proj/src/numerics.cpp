#include "jer/numerics.hpp"

#include <boost/math/tools/minima.hpp>
#include <boost/math/tools/roots.hpp>
#include <unsupported/Eigen/NonLinearOptimization>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace jer::numerics {

namespace {

struct LmFunctor {
  using Scalar = double;
  int n_inputs;
  int n_values;
  const ResidualFn* residuals;
  const JacobianFn* jacobian;
  int* counter;

  int inputs() const { return n_inputs; }
  int values() const { return n_values; }

  int operator()(const Eigen::VectorXd& x, Eigen::VectorXd& fvec) const {
    ++*counter;
    (*residuals)(x, fvec);
    return fvec.allFinite() ? 0 : -1;
  }
  int df(const Eigen::VectorXd& x, Eigen::MatrixXd& fjac) const {
    (*jacobian)(x, fjac);
    return 0;
  }
};

}  // namespace

LmResult levenberg_marquardt(int n_residuals, const ResidualFn& residuals,
                             const JacobianFn& jacobian, Eigen::VectorXd x0,
                             const LmOptions& options) {
  const int n = static_cast<int>(x0.size());
  if (n_residuals < n) {
    throw std::invalid_argument("levenberg_marquardt: fewer residuals than parameters");
  }
  int evaluations = 0;
  LmFunctor functor{n, n_residuals, &residuals, &jacobian, &evaluations};
  Eigen::LevenbergMarquardt<LmFunctor> lm(functor);
  lm.parameters.maxfev = options.max_evaluations;
  lm.parameters.ftol = options.ftol;
  lm.parameters.xtol = options.xtol;
  lm.parameters.gtol = 0.0;

  using namespace Eigen::LevenbergMarquardtSpace;
  const Status status = lm.minimize(x0);

  LmResult result;
  result.x = x0;
  Eigen::VectorXd r(n_residuals);
  residuals(result.x, r);
  result.cost = r.squaredNorm();
  result.evaluations = evaluations;
  switch (status) {
    case RelativeReductionTooSmall:
    case RelativeErrorTooSmall:
    case RelativeErrorAndReductionTooSmall:
    case CosinusTooSmall:
    case FtolTooSmall:
    case XtolTooSmall:
    case GtolTooSmall:
      result.converged = std::isfinite(result.cost);
      break;
    default:
      result.converged = false;
  }
  return result;
}

Eigen::MatrixXd normal_covariance(const Eigen::MatrixXd& jacobian) {
  const Eigen::MatrixXd jtj = jacobian.transpose() * jacobian;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(jtj);
  if (ldlt.info() == Eigen::Success && ldlt.isPositive() &&
      ldlt.vectorD().minCoeff() > 1e-14 * ldlt.vectorD().maxCoeff()) {
    return ldlt.solve(Eigen::MatrixXd::Identity(jtj.rows(), jtj.cols()));
  }
  return jtj.completeOrthogonalDecomposition().pseudoInverse();
}

double find_root(const std::function<double(double)>& f, double lo, double hi,
                 double abs_tol, int max_iter) {
  double flo = f(lo);
  double fhi = f(hi);
  if (flo == 0.0) return lo;
  if (fhi == 0.0) return hi;
  if ((flo < 0) == (fhi < 0)) {
    throw std::invalid_argument("find_root: bracket does not change sign");
  }
  boost::uintmax_t iters = static_cast<boost::uintmax_t>(max_iter);
  auto tol = [abs_tol](double a, double b) { return std::abs(b - a) <= abs_tol; };
  const auto [a, b] = boost::math::tools::toms748_solve(f, lo, hi, flo, fhi, tol, iters);
  return 0.5 * (a + b);
}

double bisect_root(const std::function<double(double)>& f, double lo, double hi,
                   double abs_tol) {
  auto tol = [abs_tol](double a, double b) { return std::abs(b - a) <= abs_tol; };
  boost::uintmax_t iters = 400;
  const auto [a, b] = boost::math::tools::bisect(f, lo, hi, tol, iters);
  return 0.5 * (a + b);
}

double minimize_bracketed(const std::function<double(double)>& f, double lo, double hi,
                          double abs_tol) {
  const double centre = 0.5 * (lo + hi);
  const double half = 0.5 * (hi - lo);
  if (!(half > 0)) return centre;
  // Brent's tolerance is relative to |u|; choose the bit count so that it is
  // at most abs_tol across the whole bracket, but never beyond sqrt(eps).
  int bits = static_cast<int>(std::ceil(std::log2(std::max(half / abs_tol, 2.0)))) + 1;
  bits = std::clamp(bits, 8, std::numeric_limits<double>::digits / 2);
  boost::uintmax_t iters = 500;
  auto shifted = [&](double u) { return f(centre + u); };
  const auto best = boost::math::tools::brent_find_minima(shifted, -half, half, bits, iters);
  return centre + best.first;
}

LineFit weighted_fit_through_origin(std::span<const double> x, std::span<const double> y,
                                    std::span<const double> sigma) {
  if (x.size() != y.size() || x.size() != sigma.size() || x.empty()) {
    throw std::invalid_argument("weighted_fit_through_origin: size mismatch");
  }
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double w = 1.0 / (sigma[i] * sigma[i]);
    sxx += w * x[i] * x[i];
    sxy += w * x[i] * y[i];
  }
  if (!(sxx > 0)) throw std::invalid_argument("weighted_fit_through_origin: all x are zero");
  LineFit fit;
  fit.slope = sxy / sxx;
  fit.slope_sigma = 1.0 / std::sqrt(sxx);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = (y[i] - fit.slope * x[i]) / sigma[i];
    fit.chi2 += r * r;
  }
  fit.dof = static_cast<int>(x.size()) - 1;
  return fit;
}

LineFit weighted_fit_with_intercept(std::span<const double> x, std::span<const double> y,
                                    std::span<const double> sigma) {
  if (x.size() != y.size() || x.size() != sigma.size() || x.size() < 2) {
    throw std::invalid_argument("weighted_fit_with_intercept: need at least two points");
  }
  double s = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double w = 1.0 / (sigma[i] * sigma[i]);
    s += w;
    sx += w * x[i];
    sy += w * y[i];
    sxx += w * x[i] * x[i];
    sxy += w * x[i] * y[i];
  }
  const double det = s * sxx - sx * sx;
  if (!(det > 1e-12 * s * sxx)) {
    throw std::invalid_argument("weighted_fit_with_intercept: x values are degenerate");
  }
  LineFit fit;
  fit.slope = (s * sxy - sx * sy) / det;
  fit.intercept = (sxx * sy - sx * sxy) / det;
  fit.slope_sigma = std::sqrt(s / det);
  fit.intercept_sigma = std::sqrt(sxx / det);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = (y[i] - fit.intercept - fit.slope * x[i]) / sigma[i];
    fit.chi2 += r * r;
  }
  fit.dof = static_cast<int>(x.size()) - 2;
  return fit;
}

WeightedMean inverse_variance_mean(std::span<const double> values, std::span<const double> sigma) {
  if (values.size() != sigma.size() || values.empty()) {
    throw std::invalid_argument("inverse_variance_mean: size mismatch");
  }
  double sw = 0, swy = 0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!(sigma[i] > 0)) throw std::invalid_argument("inverse_variance_mean: sigma must be > 0");
    const double w = 1.0 / (sigma[i] * sigma[i]);
    sw += w;
    swy += w * values[i];
  }
  WeightedMean m;
  m.mean = swy / sw;
  m.sigma = 1.0 / std::sqrt(sw);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double r = (values[i] - m.mean) / sigma[i];
    m.chi2 += r * r;
  }
  m.dof = static_cast<int>(values.size()) - 1;
  return m;
}

double median(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("median of empty set");
  const auto mid = values.begin() + static_cast<std::ptrdiff_t>(values.size() / 2);
  std::nth_element(values.begin(), mid, values.end());
  if (values.size() % 2 == 1) return *mid;
  const double upper = *mid;
  const double lower = *std::max_element(values.begin(), mid);
  return 0.5 * (lower + upper);
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9e3779b97f4a7c15ULL + (b << 6) + (b >> 2) + b * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 1469598103934665603ULL;
  for (const unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace jer::numerics
