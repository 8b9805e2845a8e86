#include "jer/io.hpp"

#include "jer/error.hpp"

#include <yaml-cpp/yaml.h>

#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

namespace jer::io {

namespace fs = std::filesystem;

namespace {

// Map node whose keys must all be consumed.
class Section {
 public:
  Section(YAML::Node node, std::string where)
      : node_(std::move(node)), where_(std::move(where)), present_(node_ && !node_.IsNull()) {
    if (present_ && !node_.IsMap()) throw ConfigError(where_ + ": expected a mapping");
  }

  template <typename T>
  bool get(const std::string& key, T& out, double scale = 1.0) {
    used_.insert(key);
    if (!present_ || !node_[key]) return false;
    try {
      if constexpr (std::is_same_v<T, double>) {
        out = node_[key].as<double>() * scale;
      } else {
        out = node_[key].as<T>();
      }
    } catch (const YAML::Exception&) {
      throw ConfigError(where_ + "." + key + ": invalid value");
    }
    return true;
  }

  YAML::Node child(const std::string& key) {
    used_.insert(key);
    return present_ ? node_[key] : YAML::Node{};
  }

  void finish() const {
    if (!present_) return;
    for (const auto& kv : node_) {
      const auto key = kv.first.as<std::string>();
      if (!used_.count(key)) throw ConfigError(where_ + ": unknown key '" + key + "'");
    }
  }

 private:
  YAML::Node node_;
  std::string where_;
  bool present_ = false;
  std::set<std::string> used_;
};

DeviceSpec parse_device(const YAML::Node& node, std::size_t index) {
  Section s(node, "devices[" + std::to_string(index) + "]");
  DeviceSpec d;
  if (!s.get("id", d.device_id)) throw ConfigError("devices[" + std::to_string(index) + "]: missing id");
  s.get("sample", d.sample_id);
  std::string kind = "control";
  s.get("kind", kind);
  d.kind = parse_device_kind(kind);
  s.get("jj_count", d.jj_count);
  s.get("area_each_um2", d.area_each_um2);
  if (!s.get("bare_f0_ghz", d.bare_f0_hz, 1e9)) {
    throw ConfigError(d.device_id + ": missing bare_f0_ghz");
  }
  s.get("simulate", d.simulate);
  s.get("line_tls", d.line_tls);
  double l_tj_nh = 0.0;
  if (s.get("l_tj_nh", l_tj_nh)) d.l_tj = l_tj_nh * 1e-9;
  s.finish();
  return d;
}

}  // namespace

ScenarioConfig parse_scenario_config(const std::string& yaml_text) {
  YAML::Node root;
  try {
    root = YAML::Load(yaml_text);
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("config is not valid YAML: ") + e.what());
  }
  ScenarioConfig c = ScenarioConfig::default_scenario();
  Section top(root, "config");
  top.get("seed", c.seed);
  top.get("temperature_mk", c.temperature, 1e-3);
  top.get("jc_ua_per_um2", c.jc_ua_per_um2);

  Section line(top.child("line"), "line");
  line.get("z0_ohm", c.z0);
  line.get("v_ph_m_per_s", c.v_ph);
  line.finish();

  Section coupling(top.child("coupling"), "coupling");
  coupling.get("feed_z0_ohm", c.feed_z0);
  coupling.get("c_couple_ff", c.c_couple, 1e-15);
  coupling.get("l_couple_nh", c.l_couple, 1e-9);
  coupling.finish();

  Section loss(top.child("loss"), "loss");
  loss.get("line_gamma", c.line_gamma);
  loss.get("internal_rate_per_um2", c.internal_rate_per_area);
  loss.get("external_rate", c.external_rate);
  loss.get("dummy_external_rate", c.dummy_external_rate);
  loss.finish();

  Section tls(top.child("tls"), "tls");
  tls.get("n_c", c.tls_n_c);
  tls.get("alpha", c.tls_alpha);
  tls.finish();

  Section sweep(top.child("sweep"), "sweep");
  std::vector<double> powers;
  if (sweep.get("powers_dbm", powers)) c.powers_dbm = powers;
  Section range(sweep.child("power_range"), "sweep.power_range");
  double start = 0, stop = 0, step = 0;
  const bool has_range = range.get("start_dbm", start);
  if (has_range) {
    if (!range.get("stop_dbm", stop) || !range.get("step_db", step) || !(step > 0) || stop < start) {
      throw ConfigError("sweep.power_range needs start_dbm <= stop_dbm and step_db > 0");
    }
    c.powers_dbm.clear();
    for (int k = 0; start + k * step <= stop + 1e-9; ++k) c.powers_dbm.push_back(start + k * step);
  }
  range.finish();
  sweep.get("noise_sigma", c.noise_sigma);
  sweep.get("max_photon_number", c.max_photon_number);
  sweep.get("points_per_trace", c.points_per_trace);
  sweep.get("window_linewidths", c.window_linewidths);
  sweep.finish();

  const YAML::Node devices = top.child("devices");
  if (devices) {
    if (!devices.IsSequence()) throw ConfigError("devices: expected a list");
    c.devices.clear();
    for (std::size_t k = 0; k < devices.size(); ++k) c.devices.push_back(parse_device(devices[k], k));
  }
  top.finish();
  c.validate();
  return c;
}

ScenarioConfig load_scenario_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_scenario_config(buffer.str());
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

void write_trace_csv(const fs::path& path, const PowerSweepTrace& trace) {
  std::string text = "freq_hz,re_s21,im_s21\n";
  text.reserve(trace.freqs.size() * 64);
  for (std::size_t k = 0; k < trace.freqs.size(); ++k) {
    text += format_double(trace.freqs[k]);
    text += ',';
    text += format_double(trace.s21[k].real());
    text += ',';
    text += format_double(trace.s21[k].imag());
    text += '\n';
  }
  write_text(path, text);
}

std::vector<std::pair<double, cplx>> read_trace_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open trace " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw DataError(path.string() + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "freq_hz,re_s21,im_s21") {
    throw DataError(path.string() + ": expected header freq_hz,re_s21,im_s21");
  }
  std::vector<std::pair<double, cplx>> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    double v[3];
    const char* p = line.data();
    const char* end = line.data() + line.size();
    for (int c = 0; c < 3; ++c) {
      const auto res = std::from_chars(p, end, v[c]);
      const bool sep_ok = c < 2 ? (res.ptr < end && *res.ptr == ',') : res.ptr == end;
      if (res.ec != std::errc{} || !sep_ok) {
        throw DataError(path.string() + ":" + std::to_string(line_no) + ": malformed row");
      }
      p = res.ptr + 1;
    }
    rows.push_back({v[0], cplx{v[1], v[2]}});
  }
  return rows;
}

json to_json(const SweepManifest& m) {
  json devices = json::array();
  for (const ManifestDevice& d : m.devices) {
    json traces = json::array();
    for (const ManifestTrace& t : d.traces) {
      traces.push_back({{"file", t.file},
                        {"harmonic", t.harmonic},
                        {"power_index", t.power_index},
                        {"applied_power_dbm", t.applied_power_dbm}});
    }
    devices.push_back({{"device_id", d.device_id},
                       {"sample_id", d.sample_id},
                       {"kind", to_string(d.kind)},
                       {"jj_count", d.jj_count},
                       {"area_each_um2", d.area_each_um2},
                       {"a_tj_um2", d.a_tj()},
                       {"simulated", d.simulated},
                       {"design",
                        {{"z0_ohm", d.design.left.z0},
                         {"v_ph_m_per_s", d.design.left.v_ph},
                         {"half_length_m", d.design.left.length},
                         {"feed_z0_ohm", d.design.feed_z0},
                         {"c_couple_f", d.design.c_couple},
                         {"l_couple_h", d.design.l_couple}}},
                       {"traces", traces}});
  }
  return {{"temperature_k", m.temperature}, {"devices", devices}};
}

SweepManifest manifest_from_json(const json& j) {
  try {
    SweepManifest m;
    m.temperature = j.at("temperature_k").get<double>();
    for (const json& d : j.at("devices")) {
      ManifestDevice dev;
      dev.device_id = d.at("device_id").get<std::string>();
      dev.sample_id = d.at("sample_id").get<std::string>();
      dev.kind = parse_device_kind(d.at("kind").get<std::string>());
      dev.jj_count = d.at("jj_count").get<int>();
      dev.area_each_um2 = d.at("area_each_um2").get<double>();
      dev.simulated = d.value("simulated", true);
      const json& g = d.at("design");
      LineSpec half{g.at("z0_ohm").get<double>(), g.at("v_ph_m_per_s").get<double>(),
                    g.at("half_length_m").get<double>(), 0.0};
      dev.design.left = half;
      dev.design.right = half;
      dev.design.feed_z0 = g.at("feed_z0_ohm").get<double>();
      dev.design.c_couple = g.at("c_couple_f").get<double>();
      dev.design.l_couple = g.at("l_couple_h").get<double>();
      dev.design.temperature = m.temperature;
      dev.design.junction.count = dev.jj_count;
      dev.design.junction.area_each_um2 = dev.area_each_um2;
      for (const json& t : d.at("traces")) {
        dev.traces.push_back({t.at("file").get<std::string>(), t.at("harmonic").get<int>(),
                              t.value("power_index", 0), t.at("applied_power_dbm").get<double>()});
      }
      m.devices.push_back(std::move(dev));
    }
    return m;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed sweep manifest: ") + e.what());
  }
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

SweepManifest read_manifest(const fs::path& path) { return manifest_from_json(read_json(path)); }

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

json to_json(const ResonanceFit& f) {
  return {{"f_r_hz", f.f_r},
          {"f_r_sigma_hz", f.f_r_sigma},
          {"q_l", f.q_l},
          {"q_l_sigma", f.q_l_sigma},
          {"q_c_mag", f.q_c_mag},
          {"phi_rad", f.phi},
          {"q_i", f.q_i},
          {"gamma", f.gamma},
          {"gamma_sigma", f.gamma_sigma},
          {"background",
           {{"amplitude", f.background.amplitude},
            {"phase_rad", f.background.phase},
            {"delay_s", f.background.delay}}},
          {"residual_rms", f.residual_rms},
          {"flagged", f.flagged}};
}

json to_json(const TlsFitResult& r) {
  json cov = json::array();
  for (Eigen::Index i = 0; i < r.covariance.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index k = 0; k < r.covariance.cols(); ++k) row.push_back(r.covariance(i, k));
    cov.push_back(row);
  }
  const ValueWithError lp = gamma_lp(r);
  return {{"gamma0", r.gamma0},
          {"n_c", r.n_c},
          {"alpha_exp", r.alpha_exp},
          {"gamma_ext", r.gamma_ext},
          {"gamma_lp", lp.value},
          {"gamma_lp_sigma", lp.sigma},
          {"covariance", cov},
          {"ext_pinned", r.ext_pinned},
          {"residual_chi2", r.residual_chi2},
          {"dof", r.dof},
          {"top_decade_decrease", r.top_decade_decrease},
          {"unsaturated", r.unsaturated},
          {"non_monotonic", r.non_monotonic},
          {"frequency_hz", r.f},
          {"temperature_k", r.temperature}};
}

json to_json(const DesignReport& d) {
  return {{"inductance_ratio", d.inductance_ratio},
          {"voltage_drop_ratio", d.voltage_drop_ratio},
          {"node_voltage_ratio", d.node_voltage_ratio},
          {"passed", d.passed}};
}

namespace {

json line_fit_json(const numerics::LineFit& f) {
  return {{"slope", f.slope},
          {"slope_sigma", f.slope_sigma},
          {"intercept", f.intercept},
          {"intercept_sigma", f.intercept_sigma},
          {"chi2", f.chi2},
          {"dof", f.dof},
          {"chi2_per_dof", f.chi2_per_dof()}};
}

}  // namespace

json to_json(const ExtractionReport& r) {
  json baselines = json::array();
  for (const SampleBaseline& b : r.baselines) {
    baselines.push_back({{"sample_id", b.sample_id},
                         {"harmonic", b.harmonic},
                         {"mean", b.value.value},
                         {"sigma", b.value.sigma},
                         {"controls", b.controls}});
  }
  json points = json::array();
  for (const GammaTjPoint& p : r.points) {
    points.push_back({{"device_id", p.device_id},
                      {"sample_id", p.sample_id},
                      {"kind", to_string(p.kind)},
                      {"harmonic", p.harmonic},
                      {"a_tj_um2", p.a_tj},
                      {"gamma_tj", p.gamma_tj},
                      {"sigma", p.sigma},
                      {"negative", p.negative}});
  }
  json out = {{"baselines", baselines}, {"gamma_tj_points", points}, {"diagnostics", r.diagnostics}};
  if (r.internal) {
    const InternalRegression& in = *r.internal;
    out["slope_1h"] = {{"value_per_um2", in.through_origin.slope},
                       {"sigma_per_um2", in.through_origin.slope_sigma},
                       {"chi2_per_dof", in.through_origin.chi2_per_dof()},
                       {"poor_fit", in.poor_fit},
                       {"points", in.points}};
    out["fit_1h_through_origin"] = line_fit_json(in.through_origin);
    out["fit_1h_free_intercept"] = in.with_intercept ? line_fit_json(*in.with_intercept) : json(nullptr);
  } else {
    out["slope_1h"] = nullptr;
  }
  if (r.external) {
    const ExternalAverage& ex = *r.external;
    out["mean_2h"] = {{"value", ex.mean.mean},
                      {"sigma", ex.mean.sigma},
                      {"chi2", ex.mean.chi2},
                      {"dof", ex.mean.dof},
                      {"points", ex.points}};
    out["area_slope_2h"] = ex.area_slope ? line_fit_json(*ex.area_slope) : json(nullptr);
    out["area_slope_2h_consistent_with_zero"] = ex.slope_consistent_with_zero;
  } else {
    out["mean_2h"] = nullptr;
  }
  return out;
}

json to_json(const ScenarioConfig& c) {
  json devices = json::array();
  for (const DeviceSpec& d : c.devices) {
    json dev = {{"device_id", d.device_id},
                {"sample_id", d.sample_id},
                {"kind", to_string(d.kind)},
                {"jj_count", d.jj_count},
                {"area_each_um2", d.area_each_um2},
                {"bare_f0_hz", d.bare_f0_hz},
                {"simulate", d.simulate},
                {"line_tls", d.line_tls}};
    dev["l_tj_h"] = d.l_tj ? json(*d.l_tj) : json(nullptr);
    devices.push_back(dev);
  }
  return {{"z0_ohm", c.z0},
          {"v_ph_m_per_s", c.v_ph},
          {"feed_z0_ohm", c.feed_z0},
          {"c_couple_f", c.c_couple},
          {"l_couple_h", c.l_couple},
          {"temperature_k", c.temperature},
          {"jc_ua_per_um2", c.jc_ua_per_um2},
          {"line_gamma", c.line_gamma},
          {"internal_rate_per_um2", c.internal_rate_per_area},
          {"external_rate", c.external_rate},
          {"dummy_external_rate", c.dummy_external_rate},
          {"tls_n_c", c.tls_n_c},
          {"tls_alpha", c.tls_alpha},
          {"noise_sigma", c.noise_sigma},
          {"powers_dbm", c.powers_dbm},
          {"max_photon_number", c.max_photon_number},
          {"points_per_trace", c.points_per_trace},
          {"window_linewidths", c.window_linewidths},
          {"seed", c.seed},
          {"devices", devices}};
}

}  // namespace jer::io
