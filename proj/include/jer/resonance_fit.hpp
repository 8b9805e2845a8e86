#pragma once

#include "jer/two_port.hpp"

#include <string>
#include <vector>

namespace jer {

/// One frequency sweep of S21 at a fixed applied power.
struct PowerSweepTrace {
  std::vector<double> freqs;  // Hz, strictly increasing
  std::vector<cplx> s21;
  double applied_power = 0.0;  // W at the device input
  std::string device_id;
  int harmonic = 1;

  void validate() const;
};

/// Environment factor a * exp(j alpha) * exp(-2 pi j f tau).
struct NotchBackground {
  double amplitude = 1.0;
  double phase = 0.0;
  double delay = 0.0;  // s
};

struct NotchParameters {
  double f_r = 0.0;
  double q_l = 0.0;
  double q_c_mag = 0.0;
  double phi = 0.0;
  NotchBackground background;
};

/// S21(f) = a e^{j alpha} e^{-2 pi j f tau} [1 - (Q_l/|Q_c|) e^{j phi} / (1 + 2 j Q_l (f/f_r - 1))]
cplx notch_model(const NotchParameters& p, double f);

struct ResonanceFit {
  double f_r = 0.0;
  double q_l = 0.0;
  double q_c_mag = 0.0;
  double phi = 0.0;
  double q_i = 0.0;
  double gamma = 0.0;  // 1 / q_i
  NotchBackground background;
  double residual_rms = 0.0;  // relative to the background amplitude

  double f_r_sigma = 0.0;
  double q_l_sigma = 0.0;
  double gamma_sigma = 0.0;
  bool flagged = false;  // residual above threshold or window too narrow

  /// 1 / Re(1/Q_c): the coupling Q that enters the photon-number conversion.
  double q_c_real() const;
};

struct NotchFitOptions {
  double residual_flag = 0.1;
  double no_dip_ratio = 0.99;
  int max_evaluations = 2000;
};

/// Delay estimate -> algebraic circle fit -> phase fit for (f_r, Q_l) ->
/// diameter correction for (|Q_c|, phi) -> joint least-squares refinement.
/// Throws DataError when no dip is present and FitError on non-convergence
/// or a negative internal loss.
ResonanceFit fit_notch(const PowerSweepTrace& trace, const NotchFitOptions& options = {});

struct Circle {
  cplx centre;
  double radius = 0.0;
};

/// Kasa algebraic least-squares circle.
Circle fit_circle(std::span<const cplx> points);

/// <n_p> = 2 Q_l^2 P / (Q_c hbar omega_r^2). Rejects Q_l > Q_c (1 + 1e-6).
double photon_number(double f_r, double q_l, double q_c, double applied_power);
double photon_number(const ResonanceFit& fit, double applied_power);

double dbm_to_watts(double dbm);
double watts_to_dbm(double watts);

}  // namespace jer
