#pragma once

#include "jer/numerics.hpp"
#include "jer/tls_fit.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace jer {

enum class DeviceKind { control, dummy, jer };

std::string to_string(DeviceKind kind);
DeviceKind parse_device_kind(const std::string& text);

struct DeviceRecord {
  std::string device_id;
  std::string sample_id;
  DeviceKind kind = DeviceKind::control;
  int jj_count = 0;
  std::optional<double> a_tj;  // um^2; absent for controls
  std::optional<ValueWithError> gamma_lp_1h;
  std::optional<ValueWithError> gamma_lp_2h;
  std::optional<double> l_tj;  // H

  void validate() const;
  const std::optional<ValueWithError>& gamma_lp(int harmonic) const;
  std::optional<ValueWithError>& gamma_lp(int harmonic);
};

struct GammaTjPoint {
  std::string device_id;
  std::string sample_id;
  DeviceKind kind = DeviceKind::jer;
  int harmonic = 1;
  double a_tj = 0.0;
  double gamma_tj = 0.0;
  double sigma = 0.0;
  bool negative = false;
};

struct SampleBaseline {
  std::string sample_id;
  int harmonic = 1;
  ValueWithError value;
  int controls = 0;
};

struct InternalRegression {
  numerics::LineFit through_origin;
  std::optional<numerics::LineFit> with_intercept;  // needs >= 3 points
  bool poor_fit = false;                            // chi2/dof > 2 through the origin
  int points = 0;
};

struct ExternalAverage {
  numerics::WeightedMean mean;
  std::optional<numerics::LineFit> area_slope;  // diagnostic, needs >= 3 points
  bool slope_consistent_with_zero = true;       // |slope| <= 2 sigma
  int points = 0;
};

struct ExtractionReport {
  std::vector<SampleBaseline> baselines;
  std::vector<GammaTjPoint> points;  // ordered by device_id, then harmonic
  std::optional<InternalRegression> internal;
  std::optional<ExternalAverage> external;
  std::vector<std::string> diagnostics;
};

/// Inverse-variance mean of the controls' Gamma_LP at one harmonic. The
/// records must be the controls of a single sample; fewer than two usable
/// ones is a DataError.
ValueWithError baseline(std::span<const DeviceRecord> controls, int harmonic);

/// Gamma_LP - baseline with the uncertainties added in quadrature.
ValueWithError gamma_tj(const DeviceRecord& record, const ValueWithError& baseline, int harmonic);

/// Weighted Gamma_TJ vs A_TJ fit through the origin (headline) and with a
/// free intercept (diagnostic).
InternalRegression regress_internal(std::span<const GammaTjPoint> points);

/// Inverse-variance mean of 2nd-harmonic Gamma_TJ with an area-slope check.
ExternalAverage average_external(std::span<const GammaTjPoint> points);

/// Per-sample baselines, Gamma_TJ of every dummy and JER, then the pooled
/// 1st-harmonic regression and 2nd-harmonic average over JER points only.
ExtractionReport run_extraction(const std::vector<DeviceRecord>& records);

}  // namespace jer
