#pragma once

#include "jer/extraction.hpp"
#include "jer/io.hpp"
#include "jer/resonance_fit.hpp"
#include "jer/synth.hpp"
#include "jer/tls_fit.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace jer::pipeline {

inline constexpr const char* kToolVersion = "0.1.0";

struct DesignCheckRow {
  std::string device_id;
  DeviceKind kind = DeviceKind::control;
  double l_tj = 0.0;
  DesignReport report;
};

std::vector<DesignCheckRow> design_check_all(const ScenarioConfig& config);
io::json design_check_json(const std::vector<DesignCheckRow>& rows);

/// Manifest plus one trace per manifest entry (traces[i][k] belongs to
/// manifest.devices[i].traces[k]).
struct SweepData {
  io::SweepManifest manifest;
  std::vector<std::vector<PowerSweepTrace>> traces;
};

struct Simulation {
  SweepData data;
  io::json ground_truth;
};

/// Every simulated device x harmonic x usable power. noise = false skips the
/// noise stage (useful for caching the expensive circuit evaluation).
Simulation simulate(const Scenario& scenario, std::uint64_t seed, int jobs = 1, bool noise = true);

/// Adds the seeded noise of `simulate` to noise-free data.
void add_sweep_noise(SweepData& data, double sigma, std::uint64_t seed);

/// Writes sweep_manifest.json, traces/*.csv and ground_truth.json.
void write_simulation(const Simulation& sim, const std::filesystem::path& out_dir);

/// Reads sweep_manifest.json and the trace CSVs it lists. Never touches
/// ground_truth.json.
SweepData load_sweep(const std::filesystem::path& in_dir);

struct AnalyzeOptions {
  int jobs = 1;
  int bootstrap_samples = 0;
  bool coupled_inversion = true;
};

struct TraceFitRow {
  std::string device_id;
  int harmonic = 1;
  double applied_power_dbm = 0.0;
  std::optional<ResonanceFit> fit;
  double photon_number = 0.0;
  std::string error;
};

struct PowerFitRow {
  std::string device_id;
  int harmonic = 1;
  std::optional<TlsFitResult> fit;
  std::vector<PowerPoint> points;
  std::string error;
};

struct DeltaRow {
  std::string device_id;
  std::string sample_id;
  DeviceKind kind = DeviceKind::control;
  double a_tj = 0.0;
  HarmonicPair harmonics;
  InductanceEstimate closed_form;
  std::optional<InductanceEstimate> coupled;
};

struct AnalysisResult {
  std::vector<TraceFitRow> trace_fits;
  std::vector<PowerFitRow> power_fits;
  std::vector<DeltaRow> delta_table;
  std::vector<DeviceRecord> records;
  ExtractionReport report;
  std::vector<std::string> diagnostics;
};

/// fit_notch -> photon_number -> fit_power_dependence -> gamma_lp per device
/// and harmonic, harmonic/L_TJ table, then run_extraction.
AnalysisResult analyze(const SweepData& data, const AnalyzeOptions& options = {});

/// extraction_report.json, gamma_tj_points.csv, delta_table.csv, gamma_lp.csv,
/// power_dependence.csv, resonance_fits.csv, tls_fits.json.
void write_analysis(const AnalysisResult& result, const std::filesystem::path& out_dir);

struct RunInfo {
  std::string command;
  std::string config_path;
  std::string in_dir;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  int jobs = 1;
  int bootstrap_samples = 0;
};

/// run_manifest.json content; the timestamp is the only field that differs
/// between identical reruns.
io::json run_manifest(const RunInfo& info);

}  // namespace jer::pipeline
