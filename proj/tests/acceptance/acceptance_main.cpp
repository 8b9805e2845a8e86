// Acceptance suite: prints one PASS/FAIL line per criterion and exits nonzero
// if any criterion fails.

#include "jer/circuit.hpp"
#include "jer/constants.hpp"
#include "jer/extraction.hpp"
#include "jer/io.hpp"
#include "jer/numerics.hpp"
#include "jer/pipeline.hpp"
#include "jer/resonance_fit.hpp"
#include "jer/synth.hpp"
#include "jer/tls_fit.hpp"
#include "test_support.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace jer;
using test::make_circuit;
using test::rel;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Outcome mode_solver_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(20240501);
  std::uniform_real_distribution<double> l_dist(0.0, 1e-9), z_dist(50.0, 120.0), f_dist(5.5e9, 6.5e9);
  double worst = 0.0;
  for (int i = 0; i < 50; ++i) {
    const double l = l_dist(rng), z0 = z_dist(rng), f0 = f_dist(rng);
    const JerCircuit c = make_circuit(z0, f0, l);
    const HarmonicPair num = find_harmonics(c);
    const HarmonicPair ref = transcendental_modes(c.left, c.right, l);
    worst = std::max({worst, std::abs(num.f_1h - ref.f_1h), std::abs(num.f_2h - ref.f_2h)});
  }
  const double t = seconds_since(t0);
  return {worst <= 10.0 && t < 10.0, fmt("max |df| = %.3g Hz over 50 configs, %.2f s", worst, t)};
}

Outcome even_mode_immunity() {
  const double l = 0.066e-9;
  const HarmonicPair d1 = find_harmonics(make_circuit(90.0, 6e9, l));
  const HarmonicPair d2 = find_harmonics(make_circuit(90.0, 6e9, 2.0 * l));
  const HarmonicPair c1 = find_harmonics(make_circuit(90.0, 6e9, l, 1e-15));
  const HarmonicPair c2 = find_harmonics(make_circuit(90.0, 6e9, 2.0 * l, 1e-15));
  const double dec_2h = std::abs(d2.f_2h - d1.f_2h);
  const double cpl_2h = rel(c2.f_2h, c1.f_2h);
  const double shift_1h = std::min(rel(d2.f_1h, d1.f_1h), rel(c2.f_1h, c1.f_1h));
  return {dec_2h == 0.0 && cpl_2h < 1e-5 && shift_1h > 1e-3,
          fmt("decoupled df_2H = %.3g Hz, coupled df_2H/f = %.3g, min df_1H/f = %.3g", dec_2h, cpl_2h, shift_1h)};
}

Outcome inversion_round_trip() {
  double worst_closed = 0.0, worst_coupled = 0.0;
  for (int i = 0; i <= 20; ++i) {
    const double l = 0.01e-9 * std::pow(100.0, i / 20.0);
    const JerCircuit dec = make_circuit(90.0, 6e9, l);
    const HarmonicPair h = find_harmonics(dec);
    worst_closed = std::max(worst_closed, rel(invert_l_tj(h.f_1h, h.f_2h, 90.0).l_tj, l));

    const JerCircuit cpl = make_circuit(90.0, 6e9, l, 1e-15);
    JerCircuit design = cpl;
    design.junction.l_total = 0.0;
    const double f1 = find_harmonics(cpl).f_1h;
    worst_coupled = std::max(worst_coupled, rel(invert_l_tj_coupled(design, f1, 1.0).l_tj, l));
  }
  const double worst = std::max(worst_closed, worst_coupled);
  return {worst < 1e-4, fmt("max rel err closed-form %.3g, coupled %.3g (21 values, 0.01-1 nH)", worst_closed,
                            worst_coupled)};
}

Outcome circle_fit_recovery() {
  NotchParameters p;
  p.f_r = 6e9;
  p.q_l = 5e4;
  p.q_c_mag = 1e5;
  p.background = {0.8, 0.4, 30e-9};
  const double q_i = 1e5;
  PowerSweepTrace clean;
  clean.applied_power = 1e-17;
  for (int i = 0; i < 1001; ++i) {
    const double f = p.f_r + (p.f_r / p.q_l) * 10.0 * (2.0 * i / 1000.0 - 1.0);
    clean.freqs.push_back(f);
    clean.s21.push_back(notch_model(p, f));
  }
  const double noiseless = rel(fit_notch(clean).q_i, q_i);
  std::vector<double> err;
  for (int s = 0; s < 100; ++s) {
    PowerSweepTrace t = clean;
    std::mt19937_64 rng(numerics::mix_seed(77, static_cast<std::uint64_t>(s)));
    std::normal_distribution<double> n(0.0, 0.01);
    for (auto& z : t.s21) z += cplx(n(rng), n(rng));
    err.push_back(rel(fit_notch(t).q_i, q_i));
  }
  const double med = numerics::median(err);
  return {noiseless < 1e-3 && med < 0.01,
          fmt("noiseless Q_i err %.3g, median noisy Q_i err %.3g (100 seeds, sigma 0.01)", noiseless, med)};
}

Outcome tls_fit_recovery() {
  const Eq1Params truth{2e-6, 50.0, 0.8, 3e-7};
  const double f = 6e9, T = 0.015;
  const double lp = truth.gamma0 * thermal_factor(f, T) + truth.gamma_ext;
  std::vector<double> err;
  for (int s = 0; s < 100; ++s) {
    std::mt19937_64 rng(numerics::mix_seed(99, static_cast<std::uint64_t>(s)));
    std::normal_distribution<double> g(0.0, 1.0);
    PowerDependence d;
    d.f = f;
    d.temperature = T;
    for (int i = 0; i < 20; ++i) {
      const double np = std::pow(10.0, std::log10(truth.n_c) - 3.0 + 6.0 * i / 19.0);
      const double v = eval_eq1(truth, np, f, T);
      d.points.push_back({np, v * (1.0 + 0.03 * g(rng)), 0.03 * v});
    }
    err.push_back(rel(gamma_lp(fit_power_dependence(d)).value, lp));
  }
  const double med = numerics::median(err);
  const double tanh_gap = 1.0 - thermal_factor(f, T);
  return {med < 0.10 && tanh_gap <= 1e-8,
          fmt("median Gamma_LP err %.3g (100 seeds, 3%% noise), 1 - tanh = %.3g", med, tanh_gap)};
}

Outcome end_to_end(const Scenario& scenario) {
  const auto t0 = std::chrono::steady_clock::now();
  const pipeline::SweepData clean = pipeline::simulate(scenario, 0, 1, false).data;
  pipeline::AnalyzeOptions opt;
  opt.coupled_inversion = false;
  std::vector<double> slopes, means;
  int failures = 0;
  for (int s = 1; s <= 100; ++s) {
    pipeline::SweepData data = clean;
    pipeline::add_sweep_noise(data, scenario.config.noise_sigma, static_cast<std::uint64_t>(s));
    try {
      const pipeline::AnalysisResult r = pipeline::analyze(data, opt);
      slopes.push_back(r.report.internal ? r.report.internal->through_origin.slope
                                         : std::numeric_limits<double>::quiet_NaN());
      means.push_back(r.report.external ? r.report.external->mean.mean : std::numeric_limits<double>::quiet_NaN());
    } catch (const std::exception&) {
      ++failures;
    }
  }
  const double t = seconds_since(t0);
  if (slopes.empty()) return {false, fmt("all %d runs failed", failures)};
  const double slope = numerics::median(slopes), mean = numerics::median(means);
  const double es = rel(slope, 1.61e-8), em = rel(mean, 1.61e-6);
  return {es < 0.15 && em < 0.15 && failures == 0 && t < 300.0,
          fmt("median slope_1h %.4g /um^2 (err %.3g), median mean_2h %.4g (err %.3g), %d failed runs, %.1f s",
              slope, es, mean, em, failures, t)};
}

Outcome qualitative(const pipeline::AnalysisResult& r) {
  bool delta_neg = true;
  std::vector<std::pair<double, double>> area_delta;  // sample A JERs
  for (const auto& row : r.delta_table) {
    if (row.kind != DeviceKind::jer) delta_neg = delta_neg && row.harmonics.delta() < 0.0;
    else if (row.sample_id == "A") area_delta.emplace_back(row.a_tj, row.harmonics.delta());
  }
  std::sort(area_delta.begin(), area_delta.end());
  bool delta_order = area_delta.size() >= 2;
  for (std::size_t i = 1; i < area_delta.size(); ++i) delta_order = delta_order && area_delta[i].second < area_delta[i - 1].second;

  std::vector<double> a, g;
  for (const auto& p : r.report.points) {
    if (p.kind == DeviceKind::jer && p.harmonic == 1) {
      a.push_back(p.a_tj);
      g.push_back(p.gamma_tj);
    }
  }
  double corr = 0.0;
  if (a.size() >= 3) {
    const double n = static_cast<double>(a.size());
    double ma = 0, mg = 0;
    for (std::size_t i = 0; i < a.size(); ++i) ma += a[i] / n, mg += g[i] / n;
    double sag = 0, saa = 0, sgg = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      sag += (a[i] - ma) * (g[i] - mg);
      saa += (a[i] - ma) * (a[i] - ma);
      sgg += (g[i] - mg) * (g[i] - mg);
    }
    corr = sag / std::sqrt(saa * sgg);
  }
  const bool slope_zero = r.report.external && r.report.external->area_slope && r.report.external->slope_consistent_with_zero;
  double slope_sig = 0.0;
  if (r.report.external && r.report.external->area_slope) {
    slope_sig = std::abs(r.report.external->area_slope->slope) / r.report.external->area_slope->slope_sigma;
  }
  return {delta_neg && delta_order && corr > 0.0 && slope_zero,
          fmt("Delta<0 controls/dummies: %s, Delta rises as A_TJ falls (sample A): %s, corr(A_TJ, Gamma_TJ 1H) = %.3f, "
              "2H area slope = %.2f sigma",
              delta_neg ? "yes" : "no", delta_order ? "yes" : "no", corr, slope_sig)};
}

Outcome linearity(const pipeline::AnalysisResult& r) {
  const ExtractionReport base = run_extraction(r.records);
  double worst = 0.0, scale = 0.0;
  for (double offset : {1e-7, -5e-8, 3.3e-6}) {
    std::vector<DeviceRecord> shifted = r.records;
    for (auto& rec : shifted) {
      if (rec.sample_id != "A") continue;
      for (int h : {1, 2}) {
        if (rec.gamma_lp(h)) rec.gamma_lp(h)->value += offset;
      }
    }
    const ExtractionReport moved = run_extraction(shifted);
    for (std::size_t i = 0; i < base.points.size(); ++i) {
      worst = std::max(worst, std::abs(moved.points[i].gamma_tj - base.points[i].gamma_tj));
      scale = std::max(scale, std::abs(offset) + std::abs(base.points[i].gamma_tj));
    }
  }
  // a handful of roundings at the magnitude of the largest operand
  const double bound = 8.0 * std::numeric_limits<double>::epsilon() * scale;
  return {worst <= bound, fmt("max |dGamma_TJ| = %.3g (bound %.3g) for three offsets on sample A", worst, bound)};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run(const std::string& args) {
  const std::string cmd = std::string(JERCTL_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome determinism() {
  const fs::path root = fs::temp_directory_path() / "jer_acceptance_determinism";
  fs::remove_all(root);
  const std::string config = std::string(JER_CONFIG_DIR) + "/default_scenario.yaml";
  for (const char* tag : {"a", "b"}) {
    const fs::path sim = root / tag / "sim";
    if (run("simulate --config " + config + " --seed 7 --out " + sim.string()) != 0 ||
        run("analyze --in " + sim.string() + " --out " + (root / tag / "an").string()) != 0) {
      return {false, "jerctl run failed"};
    }
  }
  int files = 0;
  std::string mismatch;
  for (const auto& e : fs::recursive_directory_iterator(root / "a")) {
    if (!e.is_regular_file()) continue;
    const fs::path relp = fs::relative(e.path(), root / "a");
    std::string x = slurp(e.path()), y = slurp(root / "b" / relp);
    if (relp.filename() == "run_manifest.json") {
      auto jx = io::json::parse(x), jy = io::json::parse(y);
      jx.erase("timestamp");
      jy.erase("timestamp");
      jx.erase("out_dir"), jy.erase("out_dir"), jx.erase("in_dir"), jy.erase("in_dir");
      x = jx.dump();
      y = jy.dump();
    }
    ++files;
    if (x != y && mismatch.empty()) mismatch = relp.string();
  }
  fs::remove_all(root);
  return {mismatch.empty() && files > 0,
          mismatch.empty() ? fmt("%d files byte-identical across two runs (run_manifest timestamp/paths excluded)", files)
                           : "differs: " + mismatch};
}

}  // namespace

int main() {
  const Scenario scenario = build_scenario(ScenarioConfig::default_scenario());
  const pipeline::AnalysisResult reference = pipeline::analyze(pipeline::simulate(scenario, scenario.config.seed).data);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"mode-solver oracle", mode_solver_oracle},
      {"even-mode immunity", even_mode_immunity},
      {"L_TJ inversion round trip", inversion_round_trip},
      {"circle-fit recovery", circle_fit_recovery},
      {"power-dependence fit recovery", tls_fit_recovery},
      {"end-to-end pipeline", [&] { return end_to_end(scenario); }},
      {"qualitative signatures", [&] { return qualitative(reference); }},
      {"pipeline linearity", [&] { return linearity(reference); }},
      {"determinism", determinism},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s  %zu  %-30s %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(), o.detail.c_str());
    std::fflush(stdout);
    failed += o.pass ? 0 : 1;
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
