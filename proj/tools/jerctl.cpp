// jerctl: design-check, simulate and analyze Josephson-junction-embedded resonators.

#include "jer/error.hpp"
#include "jer/io.hpp"
#include "jer/pipeline.hpp"

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

namespace fs = std::filesystem;
using namespace jer;

namespace {

enum ExitCode { kOk = 0, kFailure = 1, kConfig = 2, kData = 3, kFit = 4 };

struct Options {
  std::string config;
  std::string in_dir;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  int jobs = 1;
  bool bootstrap = false;
};

int cmd_design_check(const Options& opt) {
  if (opt.config.empty()) throw ConfigError("design-check needs --config");
  const ScenarioConfig config = io::load_scenario_config(opt.config);
  const auto rows = pipeline::design_check_all(config);
  bool all = true;
  for (const auto& r : rows) {
    const char* verdict = r.report.passed ? "pass" : "FAIL";
    spdlog::info("{:<8} {:<7} L_TJ={:.4f} nH ratio={:.4f} drop={:.4f} node={:.4f} {}", r.device_id,
                 to_string(r.kind), r.l_tj * 1e9, r.report.inductance_ratio, r.report.voltage_drop_ratio,
                 r.report.node_voltage_ratio, verdict);
    all = all && r.report.passed;
  }
  if (!opt.out_dir.empty()) {
    io::write_json(fs::path(opt.out_dir) / "design_check.json", pipeline::design_check_json(rows));
    io::write_json(fs::path(opt.out_dir) / "run_manifest.json",
                   pipeline::run_manifest({"design-check", opt.config, "", opt.out_dir, std::nullopt, opt.jobs, 0}));
  }
  if (!all) spdlog::error("design check failed: L_TJ above 15% of the lumped line inductance");
  return all ? kOk : kFailure;
}

int cmd_simulate(const Options& opt) {
  if (opt.config.empty() || opt.out_dir.empty()) throw ConfigError("simulate needs --config and --out");
  ScenarioConfig config = io::load_scenario_config(opt.config);
  if (opt.seed) config.seed = *opt.seed;
  spdlog::info("building scenario with {} devices", config.devices.size());
  const Scenario scenario = build_scenario(config);
  const pipeline::Simulation sim = pipeline::simulate(scenario, config.seed, opt.jobs);
  pipeline::write_simulation(sim, opt.out_dir);
  std::size_t count = 0;
  for (const auto& t : sim.data.traces) count += t.size();
  spdlog::info("wrote {} traces to {}", count, opt.out_dir);
  io::write_json(fs::path(opt.out_dir) / "run_manifest.json",
                 pipeline::run_manifest({"simulate", opt.config, "", opt.out_dir, config.seed, opt.jobs, 0}));
  return kOk;
}

int cmd_analyze(const Options& opt) {
  if (opt.in_dir.empty() || opt.out_dir.empty()) throw ConfigError("analyze needs --in and --out");
  const pipeline::SweepData data = pipeline::load_sweep(opt.in_dir);
  pipeline::AnalyzeOptions options;
  options.jobs = opt.jobs;
  options.bootstrap_samples = opt.bootstrap ? 200 : 0;
  const pipeline::AnalysisResult result = pipeline::analyze(data, options);
  for (const auto& d : result.diagnostics) spdlog::warn("{}", d);
  for (const auto& d : result.report.diagnostics) spdlog::warn("{}", d);
  pipeline::write_analysis(result, opt.out_dir);
  if (result.report.internal) {
    spdlog::info("slope_1h = {:.4e} +- {:.2e} per um^2", result.report.internal->through_origin.slope,
                 result.report.internal->through_origin.slope_sigma);
  }
  if (result.report.external) {
    spdlog::info("mean_2h  = {:.4e} +- {:.2e}", result.report.external->mean.mean,
                 result.report.external->mean.sigma);
  }
  io::write_json(fs::path(opt.out_dir) / "run_manifest.json",
                 pipeline::run_manifest({"analyze", opt.config, opt.in_dir, opt.out_dir, opt.seed, opt.jobs,
                                         options.bootstrap_samples}));
  return kOk;
}

int report(int code, const char* kind, const std::exception& e) {
  spdlog::error("code={} kind={} message=\"{}\"", code, kind, e.what());
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  auto logger = spdlog::stderr_color_mt("jerctl");
  logger->set_pattern("[%l] %v");
  spdlog::set_default_logger(logger);

  CLI::App app{"Josephson-junction-embedded resonator toolkit"};
  app.require_subcommand(1);
  Options opt;
  std::uint64_t seed = 0;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", opt.config, "scenario YAML file");
    sub->add_option("--jobs", opt.jobs, "worker threads")->check(CLI::PositiveNumber);
  };
  CLI::App* design = app.add_subcommand("design-check", "check every device against the 15% inductance limit");
  add_common(design);
  design->add_option("--out", opt.out_dir, "directory for design_check.json");

  CLI::App* simulate = app.add_subcommand("simulate", "generate synthetic power-sweep traces");
  add_common(simulate);
  simulate->add_option("--out", opt.out_dir, "output directory")->required();
  CLI::Option* seed_opt = simulate->add_option("--seed", seed, "overrides the config seed");

  CLI::App* analyze = app.add_subcommand("analyze", "fit traces and extract junction dissipation");
  add_common(analyze);
  analyze->add_option("--in", opt.in_dir, "directory with sweep_manifest.json")->required();
  analyze->add_option("--out", opt.out_dir, "output directory")->required();
  analyze->add_flag("--bootstrap", opt.bootstrap, "parametric bootstrap (200 resamples) for Gamma_LP errors");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfig;
  }
  if (seed_opt->count() > 0) opt.seed = seed;

  try {
    if (design->parsed()) return cmd_design_check(opt);
    if (simulate->parsed()) return cmd_simulate(opt);
    if (analyze->parsed()) return cmd_analyze(opt);
  } catch (const ConfigError& e) {
    return report(kConfig, "config", e);
  } catch (const FitError& e) {
    return report(kFit, "fit", e);
  } catch (const DataError& e) {
    return report(kData, "data", e);
  } catch (const std::exception& e) {
    return report(kFailure, "internal", e);
  }
  return kFailure;
}
