#include "jer/pipeline.hpp"

#include "jer/error.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <exception>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

namespace jer::pipeline {

namespace fs = std::filesystem;
using io::format_double;
using io::json;

namespace {

// Runs body(i) for i in [0, n) on up to `jobs` threads; rethrows the first
// failure by index so errors are reproducible.
template <typename F>
void parallel_for(std::size_t n, int jobs, F&& body) {
  const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(jobs, 1)));
  std::vector<std::exception_ptr> errors(n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) {
      try {
        body(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) {
          try {
            body(i);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    }
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

std::string trace_file_name(const std::string& device_id, int harmonic, int power_index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "_h%d_p%02d.csv", harmonic, power_index);
  return "traces/" + device_id + buf;
}

}  // namespace

std::vector<DesignCheckRow> design_check_all(const ScenarioConfig& config) {
  config.validate();
  std::vector<DesignCheckRow> rows;
  for (const DeviceSpec& spec : config.devices) {
    const JerCircuit c = design_circuit(config, spec);
    rows.push_back({spec.device_id, spec.kind, c.junction.l_total, design_check(c)});
  }
  return rows;
}

json design_check_json(const std::vector<DesignCheckRow>& rows) {
  json devices = json::array();
  bool all = true;
  for (const DesignCheckRow& r : rows) {
    json d = io::to_json(r.report);
    d["device_id"] = r.device_id;
    d["kind"] = to_string(r.kind);
    d["l_tj_h"] = r.l_tj;
    devices.push_back(d);
    all = all && r.report.passed;
  }
  return {{"max_inductance_ratio", kMaxInductanceRatio}, {"all_passed", all}, {"devices", devices}};
}

Simulation simulate(const Scenario& scenario, std::uint64_t seed, int jobs, bool noise) {
  struct Task {
    std::size_t device;
    int harmonic;
    int power_index;
  };
  Simulation sim;
  sim.data.manifest.temperature = scenario.config.temperature;
  std::vector<Task> tasks;
  for (std::size_t i = 0; i < scenario.devices.size(); ++i) {
    const SynthDevice& d = scenario.devices[i];
    io::ManifestDevice m;
    m.device_id = d.spec.device_id;
    m.sample_id = d.spec.sample_id;
    m.kind = d.spec.kind;
    m.jj_count = d.spec.jj_count;
    m.area_each_um2 = d.spec.area_each_um2;
    m.simulated = d.spec.simulate;
    m.design = design_circuit(scenario.config, d.spec);
    m.design.junction.l_total = 0.0;  // unknown to the analysis
    if (d.spec.simulate) {
      for (int h = 1; h <= 2; ++h) {
        for (int k : usable_powers(scenario, d, h)) {
          m.traces.push_back({trace_file_name(d.spec.device_id, h, k), h, k,
                              scenario.config.powers_dbm[static_cast<std::size_t>(k)]});
          tasks.push_back({i, h, k});
        }
      }
    }
    sim.data.manifest.devices.push_back(std::move(m));
  }

  std::vector<SynthTrace> out(tasks.size());
  parallel_for(tasks.size(), jobs, [&](std::size_t t) {
    const Task& task = tasks[t];
    out[t] = generate_noiseless_trace(scenario, scenario.devices[task.device], task.harmonic, task.power_index);
    if (noise) add_noise(out[t].trace, scenario.config.noise_sigma, seed, task.power_index);
  });

  sim.data.traces.resize(sim.data.manifest.devices.size());
  json truth_traces = json::array();
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    sim.data.traces[tasks[t].device].push_back(std::move(out[t].trace));
    const TraceTruth& tr = out[t].truth;
    truth_traces.push_back({{"device_id", tr.device_id},
                            {"harmonic", tr.harmonic},
                            {"power_index", tr.power_index},
                            {"applied_power_dbm", tr.applied_power_dbm},
                            {"photon_number", tr.photon_number},
                            {"tls_scale", tr.tls_scale},
                            {"f_r_hz", tr.f_r},
                            {"q_l", tr.q_l},
                            {"q_c", tr.q_c},
                            {"gamma_internal", tr.gamma_internal}});
  }

  json devices = json::array();
  for (const SynthDevice& d : scenario.devices) {
    json dev = {{"device_id", d.spec.device_id},
                {"sample_id", d.spec.sample_id},
                {"kind", to_string(d.spec.kind)},
                {"a_tj_um2", d.circuit.junction.total_area_um2()},
                {"l_tj_h", d.circuit.junction.l_total},
                {"simulated", d.spec.simulate},
                {"design_check", io::to_json(d.design)},
                {"f_1h_hz", d.harmonics.f_1h},
                {"f_2h_hz", d.harmonics.f_2h},
                {"delta_hz", d.harmonics.delta()},
                {"r_series_ohm", d.circuit.junction.r_series},
                {"g_shunt_s", d.circuit.junction.g_shunt},
                {"alpha_np_per_m", d.circuit.left.alpha}};
    if (d.spec.simulate) {
      json injected = json::array();
      for (int h = 1; h <= 2; ++h) {
        const InjectedLoss& l = d.loss[h - 1];
        injected.push_back({{"harmonic", h},
                            {"frequency_hz", l.frequency},
                            {"gamma_line", l.gamma_line},
                            {"gamma_junction", l.gamma_junction},
                            {"gamma_coupling", l.gamma_coupling},
                            {"gamma_lp", injected_gamma_lp(scenario, d, h)}});
      }
      dev["injected"] = injected;
    }
    devices.push_back(dev);
  }
  sim.ground_truth = {{"seed", seed},
                      {"config", io::to_json(scenario.config)},
                      {"devices", devices},
                      {"traces", truth_traces}};
  return sim;
}

void add_sweep_noise(SweepData& data, double sigma, std::uint64_t seed) {
  for (std::size_t i = 0; i < data.traces.size(); ++i) {
    for (std::size_t k = 0; k < data.traces[i].size(); ++k) {
      add_noise(data.traces[i][k], sigma, seed, data.manifest.devices[i].traces[k].power_index);
    }
  }
}

void write_simulation(const Simulation& sim, const fs::path& out_dir) {
  fs::create_directories(out_dir / "traces");
  io::write_json(out_dir / "sweep_manifest.json", io::to_json(sim.data.manifest));
  for (std::size_t i = 0; i < sim.data.traces.size(); ++i) {
    for (std::size_t k = 0; k < sim.data.traces[i].size(); ++k) {
      io::write_trace_csv(out_dir / sim.data.manifest.devices[i].traces[k].file, sim.data.traces[i][k]);
    }
  }
  io::write_json(out_dir / "ground_truth.json", sim.ground_truth);
}

SweepData load_sweep(const fs::path& in_dir) {
  SweepData data;
  const fs::path manifest_path = in_dir / "sweep_manifest.json";
  if (!fs::exists(manifest_path)) throw DataError("missing " + manifest_path.string());
  data.manifest = io::read_manifest(manifest_path);
  data.traces.resize(data.manifest.devices.size());
  for (std::size_t i = 0; i < data.manifest.devices.size(); ++i) {
    const io::ManifestDevice& d = data.manifest.devices[i];
    for (const io::ManifestTrace& t : d.traces) {
      PowerSweepTrace trace;
      trace.device_id = d.device_id;
      trace.harmonic = t.harmonic;
      trace.applied_power = dbm_to_watts(t.applied_power_dbm);
      for (const auto& [f, s] : io::read_trace_csv(in_dir / t.file)) {
        trace.freqs.push_back(f);
        trace.s21.push_back(s);
      }
      data.traces[i].push_back(std::move(trace));
    }
  }
  return data;
}

AnalysisResult analyze(const SweepData& data, const AnalyzeOptions& options) {
  const io::SweepManifest& m = data.manifest;
  if (data.traces.size() != m.devices.size()) throw DataError("trace list does not match the manifest");

  // Resonance fits, in manifest order.
  struct Ref {
    std::size_t device;
    std::size_t trace;
  };
  std::vector<Ref> refs;
  for (std::size_t i = 0; i < m.devices.size(); ++i) {
    if (data.traces[i].size() != m.devices[i].traces.size()) {
      throw DataError(m.devices[i].device_id + ": trace count does not match the manifest");
    }
    for (std::size_t k = 0; k < data.traces[i].size(); ++k) refs.push_back({i, k});
  }
  AnalysisResult result;
  result.trace_fits.resize(refs.size());
  parallel_for(refs.size(), options.jobs, [&](std::size_t r) {
    const auto [i, k] = refs[r];
    const io::ManifestTrace& meta = m.devices[i].traces[k];
    TraceFitRow& row = result.trace_fits[r];
    row.device_id = m.devices[i].device_id;
    row.harmonic = meta.harmonic;
    row.applied_power_dbm = meta.applied_power_dbm;
    try {
      row.fit = fit_notch(data.traces[i][k]);
      row.photon_number = photon_number(*row.fit, data.traces[i][k].applied_power);
    } catch (const std::exception& e) {
      row.fit.reset();
      row.error = e.what();
    }
  });

  // Power dependence per device and harmonic.
  struct Group {
    std::size_t device;
    int harmonic;
  };
  std::vector<Group> groups;
  for (std::size_t i = 0; i < m.devices.size(); ++i) {
    if (!m.devices[i].simulated) {
      result.diagnostics.push_back(m.devices[i].device_id + ": no measurement (device excluded)");
      continue;
    }
    for (int h = 1; h <= 2; ++h) groups.push_back({i, h});
  }
  result.power_fits.resize(groups.size());
  std::vector<std::optional<double>> lowest_power_f(groups.size());
  for (std::size_t g = 0; g < groups.size(); ++g) {
    PowerFitRow& row = result.power_fits[g];
    row.device_id = m.devices[groups[g].device].device_id;
    row.harmonic = groups[g].harmonic;
    double lowest = 0.0;
    for (std::size_t r = 0; r < refs.size(); ++r) {
      const TraceFitRow& t = result.trace_fits[r];
      if (refs[r].device != groups[g].device || t.harmonic != groups[g].harmonic || !t.fit) continue;
      if (!lowest_power_f[g] || t.applied_power_dbm < lowest) {
        lowest = t.applied_power_dbm;
        lowest_power_f[g] = t.fit->f_r;
      }
      if (t.fit->flagged || !(t.fit->gamma > 0) || !(t.fit->gamma_sigma > 0)) continue;
      row.points.push_back({t.photon_number, t.fit->gamma, t.fit->gamma_sigma});
    }
  }
  TlsFitOptions tls_options;
  tls_options.bootstrap_samples = options.bootstrap_samples;
  parallel_for(groups.size(), options.jobs, [&](std::size_t g) {
    PowerFitRow& row = result.power_fits[g];
    if (!lowest_power_f[g]) {
      row.error = "no usable resonance fits";
      return;
    }
    PowerDependence pd;
    pd.points = row.points;
    pd.f = *lowest_power_f[g];
    pd.temperature = m.temperature;
    pd.device_id = row.device_id;
    pd.harmonic = row.harmonic;
    try {
      row.fit = fit_power_dependence(pd, tls_options);
    } catch (const std::exception& e) {
      row.error = e.what();
    }
  });

  // Device records and the harmonic table.
  for (std::size_t i = 0; i < m.devices.size(); ++i) {
    const io::ManifestDevice& d = m.devices[i];
    if (!d.simulated) continue;
    DeviceRecord rec;
    rec.device_id = d.device_id;
    rec.sample_id = d.sample_id;
    rec.kind = d.kind;
    rec.jj_count = d.jj_count;
    if (d.kind != DeviceKind::control) rec.a_tj = d.a_tj();
    std::optional<double> f[2];
    for (std::size_t g = 0; g < groups.size(); ++g) {
      if (groups[g].device != i) continue;
      const int h = groups[g].harmonic;
      f[h - 1] = lowest_power_f[g];
      const PowerFitRow& row = result.power_fits[g];
      if (row.fit) {
        rec.gamma_lp(h) = gamma_lp(*row.fit);
        if (row.fit->non_monotonic) {
          result.diagnostics.push_back(row.device_id + " harmonic " + std::to_string(h) +
                                       ": Gamma rises with power beyond noise");
        }
      } else {
        result.diagnostics.push_back(row.device_id + " harmonic " + std::to_string(h) + ": " + row.error);
      }
    }
    if (f[0] && f[1]) {
      DeltaRow row;
      row.device_id = d.device_id;
      row.sample_id = d.sample_id;
      row.kind = d.kind;
      row.a_tj = d.a_tj();
      row.harmonics = {*f[0], *f[1]};
      row.closed_form = invert_l_tj(*f[0], *f[1], d.design.left.z0);
      if (options.coupled_inversion) {
        try {
          row.coupled = invert_l_tj_coupled(d.design, *f[0]);
        } catch (const std::exception& e) {
          result.diagnostics.push_back(d.device_id + ": coupled L_TJ inversion failed: " + e.what());
        }
      }
      rec.l_tj = row.coupled ? row.coupled->l_tj : row.closed_form.l_tj;
      result.delta_table.push_back(row);
    }
    result.records.push_back(rec);
  }

  result.report = run_extraction(result.records);
  return result;
}

namespace {

std::string csv_bool(bool b) { return b ? "true" : "false"; }

}  // namespace

void write_analysis(const AnalysisResult& r, const fs::path& out_dir) {
  fs::create_directories(out_dir);

  json records = json::array();
  for (const DeviceRecord& d : r.records) {
    auto lp = [](const std::optional<ValueWithError>& v) {
      return v ? json{{"value", v->value}, {"sigma", v->sigma}} : json(nullptr);
    };
    records.push_back({{"device_id", d.device_id},
                       {"sample_id", d.sample_id},
                       {"kind", to_string(d.kind)},
                       {"jj_count", d.jj_count},
                       {"a_tj_um2", d.a_tj ? json(*d.a_tj) : json(nullptr)},
                       {"gamma_lp_1h", lp(d.gamma_lp_1h)},
                       {"gamma_lp_2h", lp(d.gamma_lp_2h)},
                       {"l_tj_h", d.l_tj ? json(*d.l_tj) : json(nullptr)}});
  }
  json report = io::to_json(r.report);
  report["devices"] = records;
  std::vector<std::string> diagnostics = r.diagnostics;
  diagnostics.insert(diagnostics.end(), r.report.diagnostics.begin(), r.report.diagnostics.end());
  report["diagnostics"] = diagnostics;
  io::write_json(out_dir / "extraction_report.json", report);

  std::string points = "device_id,harmonic,a_tj,gamma_tj,sigma\n";
  for (const GammaTjPoint& p : r.report.points) {
    points += p.device_id + "," + std::to_string(p.harmonic) + "," + format_double(p.a_tj) + "," +
              format_double(p.gamma_tj) + "," + format_double(p.sigma) + "\n";
  }
  io::write_text(out_dir / "gamma_tj_points.csv", points);

  std::string delta =
      "device_id,sample_id,kind,a_tj_um2,f_1h_hz,f_2h_hz,delta_hz,l_tj_closed_form_h,"
      "within_coupling_systematics,l_tj_coupled_h\n";
  for (const DeltaRow& d : r.delta_table) {
    delta += d.device_id + "," + d.sample_id + "," + to_string(d.kind) + "," + format_double(d.a_tj) + "," +
             format_double(d.harmonics.f_1h) + "," + format_double(d.harmonics.f_2h) + "," +
             format_double(d.harmonics.delta()) + "," + format_double(d.closed_form.l_tj) + "," +
             csv_bool(d.closed_form.within_coupling_systematics) + "," +
             (d.coupled ? format_double(d.coupled->l_tj) : std::string()) + "\n";
  }
  io::write_text(out_dir / "delta_table.csv", delta);

  std::string lp = "device_id,sample_id,kind,harmonic,gamma_lp,sigma\n";
  for (const DeviceRecord& d : r.records) {
    for (int h = 1; h <= 2; ++h) {
      if (const auto& v = d.gamma_lp(h)) {
        lp += d.device_id + "," + d.sample_id + "," + to_string(d.kind) + "," + std::to_string(h) + "," +
              format_double(v->value) + "," + format_double(v->sigma) + "\n";
      }
    }
  }
  io::write_text(out_dir / "gamma_lp.csv", lp);

  std::string pd = "device_id,harmonic,n_p,gamma,sigma_gamma\n";
  json tls = json::array();
  for (const PowerFitRow& row : r.power_fits) {
    for (const PowerPoint& p : row.points) {
      pd += row.device_id + "," + std::to_string(row.harmonic) + "," + format_double(p.n_p) + "," +
            format_double(p.gamma) + "," + format_double(p.sigma) + "\n";
    }
    json entry = {{"device_id", row.device_id}, {"harmonic", row.harmonic}};
    entry["fit"] = row.fit ? io::to_json(*row.fit) : json(nullptr);
    entry["error"] = row.error;
    tls.push_back(entry);
  }
  io::write_text(out_dir / "power_dependence.csv", pd);
  io::write_json(out_dir / "tls_fits.json", tls);

  std::string fits =
      "device_id,harmonic,applied_power_dbm,n_p,f_r_hz,q_l,q_c_mag,phi_rad,q_i,gamma,gamma_sigma,"
      "residual_rms,flagged,error\n";
  for (const TraceFitRow& t : r.trace_fits) {
    fits += t.device_id + "," + std::to_string(t.harmonic) + "," + format_double(t.applied_power_dbm) + ",";
    if (t.fit) {
      const ResonanceFit& f = *t.fit;
      fits += format_double(t.photon_number) + "," + format_double(f.f_r) + "," + format_double(f.q_l) + "," +
              format_double(f.q_c_mag) + "," + format_double(f.phi) + "," + format_double(f.q_i) + "," +
              format_double(f.gamma) + "," + format_double(f.gamma_sigma) + "," +
              format_double(f.residual_rms) + "," + csv_bool(f.flagged) + ",";
    } else {
      fits += ",,,,,,,,,,";
    }
    std::string err = t.error;
    std::replace(err.begin(), err.end(), ',', ';');
    fits += err + "\n";
  }
  io::write_text(out_dir / "resonance_fits.csv", fits);
}

json run_manifest(const RunInfo& info) {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm utc{};
  gmtime_r(&now, &utc);
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", &utc);
  json j = {{"command", info.command},
            {"config_path", info.config_path},
            {"in_dir", info.in_dir},
            {"out_dir", info.out_dir},
            {"jobs", info.jobs},
            {"bootstrap_samples", info.bootstrap_samples},
            {"tool_version", kToolVersion},
            {"timestamp", stamp}};
  j["seed"] = info.seed ? json(*info.seed) : json(nullptr);
  return j;
}

}  // namespace jer::pipeline
