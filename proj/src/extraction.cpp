#include "jer/extraction.hpp"

#include "jer/error.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

namespace jer {

std::string to_string(DeviceKind kind) {
  switch (kind) {
    case DeviceKind::control: return "control";
    case DeviceKind::dummy: return "dummy";
    case DeviceKind::jer: return "jer";
  }
  return "unknown";
}

DeviceKind parse_device_kind(const std::string& text) {
  if (text == "control") return DeviceKind::control;
  if (text == "dummy") return DeviceKind::dummy;
  if (text == "jer") return DeviceKind::jer;
  throw ConfigError("unknown device kind '" + text + "'");
}

void DeviceRecord::validate() const {
  if (device_id.empty()) throw DataError("device record without an id");
  switch (kind) {
    case DeviceKind::control:
      if (a_tj) throw DataError(device_id + ": control devices carry no junction area");
      break;
    case DeviceKind::dummy:
      if (a_tj && *a_tj != 0.0) throw DataError(device_id + ": dummy junction area must be 0");
      break;
    case DeviceKind::jer:
      if (!a_tj || !(*a_tj > 0)) throw DataError(device_id + ": JER needs a positive junction area");
      break;
  }
}

const std::optional<ValueWithError>& DeviceRecord::gamma_lp(int harmonic) const {
  return harmonic == 1 ? gamma_lp_1h : gamma_lp_2h;
}

std::optional<ValueWithError>& DeviceRecord::gamma_lp(int harmonic) {
  return harmonic == 1 ? gamma_lp_1h : gamma_lp_2h;
}

ValueWithError baseline(std::span<const DeviceRecord> controls, int harmonic) {
  std::vector<double> values;
  std::vector<double> sigmas;
  std::string sample;
  for (const DeviceRecord& r : controls) {
    if (r.kind != DeviceKind::control) continue;
    sample = r.sample_id;
    if (const auto& g = r.gamma_lp(harmonic); g && g->sigma > 0) {
      values.push_back(g->value);
      sigmas.push_back(g->sigma);
    }
  }
  if (values.size() < 2) {
    std::ostringstream msg;
    msg << "sample " << sample << ": baseline for harmonic " << harmonic << " needs >= 2 controls, found "
        << values.size();
    throw DataError(msg.str());
  }
  const auto m = numerics::inverse_variance_mean(values, sigmas);
  return {m.mean, m.sigma};
}

ValueWithError gamma_tj(const DeviceRecord& record, const ValueWithError& base, int harmonic) {
  const auto& g = record.gamma_lp(harmonic);
  if (!g) {
    std::ostringstream msg;
    msg << record.device_id << ": no Gamma_LP for harmonic " << harmonic;
    throw DataError(msg.str());
  }
  return {g->value - base.value, std::hypot(g->sigma, base.sigma)};
}

namespace {

void split(std::span<const GammaTjPoint> points, std::vector<double>& x, std::vector<double>& y,
           std::vector<double>& s) {
  for (const GammaTjPoint& p : points) {
    x.push_back(p.a_tj);
    y.push_back(p.gamma_tj);
    s.push_back(p.sigma);
  }
}

}  // namespace

InternalRegression regress_internal(std::span<const GammaTjPoint> points) {
  std::vector<double> x, y, s;
  split(points, x, y, s);
  const std::set<double> distinct(x.begin(), x.end());
  if (points.size() < 2 || distinct.size() < 2) {
    throw DataError("internal regression needs >= 2 points at distinct areas");
  }
  InternalRegression out;
  out.points = static_cast<int>(points.size());
  out.through_origin = numerics::weighted_fit_through_origin(x, y, s);
  if (points.size() >= 3) out.with_intercept = numerics::weighted_fit_with_intercept(x, y, s);
  out.poor_fit = out.through_origin.chi2_per_dof() > 2.0;
  return out;
}

ExternalAverage average_external(std::span<const GammaTjPoint> points) {
  if (points.size() < 2) throw DataError("external average needs >= 2 points");
  std::vector<double> x, y, s;
  split(points, x, y, s);
  ExternalAverage out;
  out.points = static_cast<int>(points.size());
  out.mean = numerics::inverse_variance_mean(y, s);
  const std::set<double> distinct(x.begin(), x.end());
  if (points.size() >= 3 && distinct.size() >= 2) {
    out.area_slope = numerics::weighted_fit_with_intercept(x, y, s);
    out.slope_consistent_with_zero = std::abs(out.area_slope->slope) <= 2.0 * out.area_slope->slope_sigma;
  }
  return out;
}

ExtractionReport run_extraction(const std::vector<DeviceRecord>& records) {
  ExtractionReport report;
  std::map<std::string, std::vector<DeviceRecord>> samples;
  std::set<std::string> ids;
  for (const DeviceRecord& r : records) {
    r.validate();
    if (!ids.insert(r.device_id).second) throw DataError("duplicate device id " + r.device_id);
    samples[r.sample_id].push_back(r);
  }

  for (const auto& [sample_id, devices] : samples) {
    for (int harmonic : {1, 2}) {
      const bool needed = std::any_of(devices.begin(), devices.end(), [&](const DeviceRecord& r) {
        return r.kind != DeviceKind::control && r.gamma_lp(harmonic).has_value();
      });
      if (!needed) continue;
      std::vector<DeviceRecord> controls;
      for (const DeviceRecord& r : devices) {
        if (r.kind == DeviceKind::control) controls.push_back(r);
      }
      if (controls.empty()) {
        std::ostringstream msg;
        msg << "sample " << sample_id << ": no control devices for the harmonic " << harmonic << " baseline";
        throw DataError(msg.str());
      }
      const ValueWithError base = baseline(controls, harmonic);
      int used = 0;
      for (const DeviceRecord& c : controls) used += c.gamma_lp(harmonic).has_value() ? 1 : 0;
      report.baselines.push_back({sample_id, harmonic, base, used});

      for (const DeviceRecord& r : devices) {
        if (r.kind == DeviceKind::control) continue;
        if (!r.gamma_lp(harmonic)) {
          std::ostringstream msg;
          msg << r.device_id << ": missing harmonic " << harmonic;
          report.diagnostics.push_back(msg.str());
          continue;
        }
        const ValueWithError g = gamma_tj(r, base, harmonic);
        GammaTjPoint p{r.device_id, sample_id, r.kind, harmonic, r.a_tj.value_or(0.0), g.value, g.sigma,
                       g.value < 0};
        if (p.negative) {
          std::ostringstream msg;
          msg << r.device_id << ": negative Gamma_TJ at harmonic " << harmonic << " (baseline fluctuation)";
          report.diagnostics.push_back(msg.str());
        }
        report.points.push_back(p);
      }
    }
  }
  std::sort(report.points.begin(), report.points.end(), [](const GammaTjPoint& a, const GammaTjPoint& b) {
    return a.device_id != b.device_id ? a.device_id < b.device_id : a.harmonic < b.harmonic;
  });

  std::vector<GammaTjPoint> first, second;
  for (const GammaTjPoint& p : report.points) {
    if (p.kind != DeviceKind::jer) continue;
    (p.harmonic == 1 ? first : second).push_back(p);
  }
  try {
    report.internal = regress_internal(first);
    if (report.internal->poor_fit) report.diagnostics.push_back("internal regression chi2/dof > 2");
  } catch (const DataError& e) {
    report.diagnostics.push_back(e.what());
  }
  try {
    report.external = average_external(second);
    if (!report.external->slope_consistent_with_zero) {
      report.diagnostics.push_back("2nd-harmonic Gamma_TJ shows an area slope beyond 2 sigma");
    }
  } catch (const DataError& e) {
    report.diagnostics.push_back(e.what());
  }
  return report;
}

}  // namespace jer
