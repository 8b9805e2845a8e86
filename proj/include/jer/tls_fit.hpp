#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

namespace jer {

struct Eq1Params {
  double gamma0 = 0.0;
  double n_c = 1.0;
  double alpha_exp = 1.0;
  double gamma_ext = 0.0;
};

/// tanh(h f / (2 k_B T)); 1 at T = 0.
double thermal_factor(double f, double temperature);

/// Gamma = gamma0 tanh(hf/2kT) / sqrt(1 + (n_p/n_c)^alpha) + gamma_ext
double eval_eq1(const Eq1Params& p, double n_p, double f, double temperature);

struct PowerPoint {
  double n_p = 0.0;
  double gamma = 0.0;
  double sigma = 0.0;
};

struct PowerDependence {
  std::vector<PowerPoint> points;
  double f = 0.0;
  double temperature = 0.015;
  std::string device_id;
  int harmonic = 1;

  /// Positive entries, >= 6 distinct n_p spanning >= 3 decades.
  void validate() const;
};

struct ValueWithError {
  double value = 0.0;
  double sigma = 0.0;
};

struct TlsFitOptions {
  double saturation_threshold = 0.05;  // top-decade relative decrease
  double pin_chi2_margin = 4.0;        // chi2 increase that keeps Gamma_ext free
  int bootstrap_samples = 0;           // 0 disables the parametric bootstrap
  std::uint64_t bootstrap_seed = 0x5eed;
};

struct TlsFitResult {
  double gamma0 = 0.0;
  double n_c = 0.0;
  double alpha_exp = 0.0;
  double gamma_ext = 0.0;
  double f = 0.0;
  double temperature = 0.0;
  Eigen::MatrixXd covariance;  // (gamma0, n_c, alpha, gamma_ext); 3x3 when pinned
  bool ext_pinned = false;
  double residual_chi2 = 0.0;
  int dof = 0;
  double top_decade_decrease = 0.0;  // of the unpinned fit
  bool unsaturated = false;          // top_decade_decrease above the threshold
  bool non_monotonic = false;        // Gamma rises by > 3 sigma with power somewhere
  double bootstrap_gamma_lp_sigma = 0.0;

  Eq1Params params() const { return {gamma0, n_c, alpha_exp, gamma_ext}; }
  double chi2_per_dof() const { return dof > 0 ? residual_chi2 / dof : 0.0; }
};

/// Weighted multi-start fit of the TLS loss model, free and with Gamma_ext pinned to 0.
/// The pinned fit is kept unless it raises chi2 by pin_chi2_margin or more
/// (the data then demand a nonzero floor). `unsaturated` reports whether the
/// free curve still falls by more than the saturation threshold over the top
/// measured decade.
/// Throws DataError on invalid input and FitError if no start converges.
TlsFitResult fit_power_dependence(const PowerDependence& data, const TlsFitOptions& options = {});

/// Low-power level gamma0 tanh(hf/2kT) + gamma_ext with linear error propagation
/// (the bootstrap spread when it was computed).
ValueWithError gamma_lp(const TlsFitResult& result);

}  // namespace jer
