#pragma once

#include "jer/extraction.hpp"
#include "jer/resonance_fit.hpp"
#include "jer/synth.hpp"
#include "jer/tls_fit.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace jer::io {

using nlohmann::json;

/// Scenario YAML; keys carry unit suffixes (e.g. z0_ohm, c_couple_ff,
/// temperature_mk). Missing keys keep the built-in defaults, unknown keys are a
/// ConfigError.
ScenarioConfig parse_scenario_config(const std::string& yaml_text);
ScenarioConfig load_scenario_config(const std::filesystem::path& path);

/// `freq_hz,re_s21,im_s21`, values in shortest round-trip form.
void write_trace_csv(const std::filesystem::path& path, const PowerSweepTrace& trace);
std::vector<std::pair<double, cplx>> read_trace_csv(const std::filesystem::path& path);

struct ManifestTrace {
  std::string file;  // relative to the manifest
  int harmonic = 1;
  int power_index = 0;
  double applied_power_dbm = 0.0;
};

/// Nominal design of one device as the analysis sees it: geometry and coupler,
/// junction inductance unknown.
struct ManifestDevice {
  std::string device_id;
  std::string sample_id;
  DeviceKind kind = DeviceKind::control;
  int jj_count = 0;
  double area_each_um2 = 0.0;
  bool simulated = true;
  JerCircuit design;
  std::vector<ManifestTrace> traces;

  double a_tj() const { return jj_count * area_each_um2; }
};

struct SweepManifest {
  double temperature = 0.015;
  std::vector<ManifestDevice> devices;
};

json to_json(const SweepManifest& m);
SweepManifest manifest_from_json(const json& j);
SweepManifest read_manifest(const std::filesystem::path& path);

json to_json(const ResonanceFit& fit);
json to_json(const TlsFitResult& fit);
json to_json(const DesignReport& report);
json to_json(const ExtractionReport& report);
json to_json(const ScenarioConfig& config);

/// Dumps with 2-space indent and a trailing newline.
void write_json(const std::filesystem::path& path, const json& j);
void write_text(const std::filesystem::path& path, const std::string& text);
json read_json(const std::filesystem::path& path);

/// Shortest decimal form that round-trips the double.
std::string format_double(double v);

}  // namespace jer::io
