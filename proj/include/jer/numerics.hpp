#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

namespace jer::numerics {

using ResidualFn = std::function<void(const Eigen::VectorXd& x, Eigen::VectorXd& residuals)>;
using JacobianFn = std::function<void(const Eigen::VectorXd& x, Eigen::MatrixXd& jacobian)>;

struct LmOptions {
  int max_evaluations = 4000;
  double ftol = 1e-15;
  double xtol = 1e-15;
};

struct LmResult {
  Eigen::VectorXd x;
  double cost = 0.0;  // sum of squared residuals
  bool converged = false;
  int evaluations = 0;
};

/// Unconstrained Levenberg-Marquardt (MINPACK lmder via Eigen). Callers map
/// bounded parameters through smooth transforms before calling.
LmResult levenberg_marquardt(int n_residuals, const ResidualFn& residuals,
                             const JacobianFn& jacobian, Eigen::VectorXd x0,
                             const LmOptions& options = {});

/// Covariance (J^T J)^-1 with a pseudo-inverse fallback for rank-deficient J.
Eigen::MatrixXd normal_covariance(const Eigen::MatrixXd& jacobian);

/// Root of f on [lo, hi] (f(lo), f(hi) of opposite sign) to an absolute tolerance.
double find_root(const std::function<double(double)>& f, double lo, double hi,
                 double abs_tol, int max_iter = 200);

/// Plain bisection; used where the bracketing guarantee matters more than speed.
double bisect_root(const std::function<double(double)>& f, double lo, double hi,
                   double abs_tol);

/// Bracketed scalar minimisation (Brent). The search runs in coordinates
/// relative to the bracket centre so that abs_tol is honoured at large |x|.
double minimize_bracketed(const std::function<double(double)>& f, double lo, double hi,
                          double abs_tol);

/// Weighted straight-line fit y = slope*x (+ intercept).
struct LineFit {
  double slope = 0.0;
  double slope_sigma = 0.0;
  double intercept = 0.0;
  double intercept_sigma = 0.0;
  double chi2 = 0.0;
  int dof = 0;
  double chi2_per_dof() const { return dof > 0 ? chi2 / dof : 0.0; }
};

LineFit weighted_fit_through_origin(std::span<const double> x, std::span<const double> y,
                                    std::span<const double> sigma);
LineFit weighted_fit_with_intercept(std::span<const double> x, std::span<const double> y,
                                    std::span<const double> sigma);

/// Inverse-variance weighted mean and its standard error.
struct WeightedMean {
  double mean = 0.0;
  double sigma = 0.0;
  double chi2 = 0.0;
  int dof = 0;
};
WeightedMean inverse_variance_mean(std::span<const double> values, std::span<const double> sigma);

double median(std::vector<double> values);

/// splitmix64 step; used to derive independent per-task seeds.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);
std::uint64_t fnv1a(std::string_view text);

}  // namespace jer::numerics
