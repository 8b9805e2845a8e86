#include "jer/synth.hpp"

#include "jer/error.hpp"
#include "jer/numerics.hpp"
#include "jer/tls_fit.hpp"

#include <cmath>
#include <random>
#include <sstream>

namespace jer {

ScenarioConfig ScenarioConfig::default_scenario() {
  ScenarioConfig c;
  for (double dbm = -170.0; dbm <= -104.0 + 1e-9; dbm += 6.0) c.powers_dbm.push_back(dbm);

  auto add = [&](std::string id, std::string sample, DeviceKind kind, int count, double area, double f0,
                 bool simulate = true) {
    DeviceSpec d;
    d.device_id = std::move(id);
    d.sample_id = std::move(sample);
    d.kind = kind;
    d.jj_count = count;
    d.area_each_um2 = area;
    d.bare_f0_hz = f0;
    d.simulate = simulate;
    c.devices.push_back(d);
  };
  add("A-C1", "A", DeviceKind::control, 0, 0.0, 5.80e9);
  add("A-C2", "A", DeviceKind::control, 0, 0.0, 5.85e9);
  add("A-D", "A", DeviceKind::dummy, 0, 0.0, 5.90e9);
  add("A-L", "A", DeviceKind::jer, 2, 20.0, 5.95e9);
  add("A-M", "A", DeviceKind::jer, 2, 10.0, 6.00e9);
  add("A-S", "A", DeviceKind::jer, 2, 5.0, 6.05e9);
  add("B-C1", "B", DeviceKind::control, 0, 0.0, 5.75e9);
  add("B-C2", "B", DeviceKind::control, 0, 0.0, 5.82e9);
  add("B-D", "B", DeviceKind::dummy, 0, 0.0, 5.88e9);
  add("B-2", "B", DeviceKind::jer, 2, 10.0, 5.94e9);
  add("B-4", "B", DeviceKind::jer, 4, 10.0, 6.02e9);
  add("B-6", "B", DeviceKind::jer, 6, 10.0, 6.08e9, false);
  return c;
}

void ScenarioConfig::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0) || !std::isfinite(v)) throw ConfigError(std::string(name) + " must be > 0");
  };
  positive(z0, "z0");
  positive(v_ph, "v_ph");
  positive(feed_z0, "feed_z0");
  positive(c_couple, "c_couple");
  positive(jc_ua_per_um2, "jc");
  positive(tls_n_c, "tls n_c");
  positive(max_photon_number, "max_photon_number");
  positive(window_linewidths, "window_linewidths");
  if (!(l_couple >= 0)) throw ConfigError("l_couple must be >= 0");
  if (!(temperature >= 0)) throw ConfigError("temperature must be >= 0");
  if (!(tls_alpha > 0 && tls_alpha <= 2)) throw ConfigError("tls alpha must lie in (0, 2]");
  if (!(line_gamma >= 0) || !(internal_rate_per_area >= 0) || !(external_rate >= 0) ||
      !(dummy_external_rate >= 0)) {
    throw ConfigError("injected loss rates must be >= 0");
  }
  if (!(noise_sigma >= 0)) throw ConfigError("noise sigma must be >= 0");
  if (points_per_trace < 50) throw ConfigError("points_per_trace must be >= 50");
  if (powers_dbm.empty()) throw ConfigError("no powers configured");
  if (devices.empty()) throw ConfigError("no devices configured");
  for (const DeviceSpec& d : devices) {
    if (d.device_id.empty()) throw ConfigError("device without an id");
    positive(d.bare_f0_hz, "bare_f0");
    if (d.kind == DeviceKind::jer && !(d.jj_count > 0 && d.area_each_um2 > 0)) {
      throw ConfigError(d.device_id + ": a JER needs junctions with positive area");
    }
    if (d.kind != DeviceKind::jer && (d.jj_count != 0 || d.area_each_um2 != 0.0)) {
      throw ConfigError(d.device_id + ": controls and dummies carry no junctions");
    }
  }
}

const SynthDevice& Scenario::device(const std::string& id) const {
  for (const SynthDevice& d : devices) {
    if (d.spec.device_id == id) return d;
  }
  throw DataError("unknown device " + id);
}

namespace {

double harmonic_frequency(const SynthDevice& d, int harmonic) {
  return harmonic == 1 ? d.harmonics.f_1h : d.harmonics.f_2h;
}

ModeLoss loss_at(const JerCircuit& c, double f) { return predict_mode_loss(c, f); }

// Root of `residual(x)` (increasing in x) for x >= 0 around a linear guess.
double solve_positive(const std::function<double(double)>& residual, double guess, const std::string& what) {
  if (guess <= 0) return 0.0;
  double lo = 0.5 * guess;
  double hi = 2.0 * guess;
  for (int k = 0; k < 20 && residual(lo) > 0; ++k) lo *= 0.5;
  for (int k = 0; k < 20 && residual(hi) < 0; ++k) hi *= 2.0;
  if (residual(lo) > 0 || residual(hi) < 0) throw ConfigError("cannot inject " + what);
  return numerics::find_root(residual, lo, hi, 1e-10 * guess);
}

void inject_line_loss(JerCircuit& c, double f_1h, double target, const std::string& id) {
  if (target == 0.0) return;
  const double probe = 1e-4;
  JerCircuit trial = c;
  trial.left.alpha = trial.right.alpha = probe;
  const double per_alpha = loss_at(trial, f_1h).gamma_line / probe;
  const double alpha = solve_positive(
      [&](double a) {
        trial.left.alpha = trial.right.alpha = a;
        return loss_at(trial, f_1h).gamma_line - target;
      },
      target / per_alpha, id + " line loss");
  c.left.alpha = c.right.alpha = alpha;
}

void inject_junction_loss(JerCircuit& c, double f_1h, double f_2h, double target_1h, double target_2h,
                          const std::string& id) {
  if (target_1h == 0.0 && target_2h == 0.0) return;
  // Linear estimate from probe values, then alternating 1-D refinement.
  const double r_probe = 1e-3;
  const double g_probe = 1e-6;
  JerCircuit trial = c;
  trial.junction.r_series = r_probe;
  const ModeLoss r1 = loss_at(trial, f_1h);
  const ModeLoss r2 = loss_at(trial, f_2h);
  trial.junction.r_series = 0.0;
  trial.junction.g_shunt = g_probe;
  const ModeLoss g1 = loss_at(trial, f_1h);
  const ModeLoss g2 = loss_at(trial, f_2h);
  const double a1 = r1.gamma_junction() / r_probe, a2 = r2.gamma_junction() / r_probe;
  const double b1 = g1.gamma_junction() / g_probe, b2 = g2.gamma_junction() / g_probe;
  const double det = a1 * b2 - a2 * b1;
  double r = 0.0;
  double g = 0.0;
  if (c.junction.l_total > 0 && std::abs(det) > 0) {
    r = (target_1h * b2 - target_2h * b1) / det;
    g = (a1 * target_2h - a2 * target_1h) / det;
  } else {
    g = target_2h / b2;
  }
  if (r < 0 || g < 0) throw ConfigError(id + ": junction loss targets are not jointly reachable");

  trial = c;
  for (int round = 0; round < 3; ++round) {
    trial.junction.r_series = r;
    g = solve_positive(
        [&](double x) {
          trial.junction.g_shunt = x;
          return loss_at(trial, f_2h).gamma_junction() - target_2h;
        },
        g, id + " external junction loss");
    trial.junction.g_shunt = g;
    if (c.junction.l_total > 0) {
      r = solve_positive(
          [&](double x) {
            trial.junction.r_series = x;
            return loss_at(trial, f_1h).gamma_junction() - target_1h;
          },
          r, id + " internal junction loss");
    }
  }
  c.junction.r_series = r;
  c.junction.g_shunt = g;
}

double tls_saturation(const ScenarioConfig& cfg, double f, double n) {
  return thermal_factor(f, cfg.temperature) / std::sqrt(1.0 + std::pow(n / cfg.tls_n_c, cfg.tls_alpha));
}

struct OperatingPoint {
  double photon_number;
  double scale;
  double gamma_internal;
  double q_l;
  double q_c;
};

OperatingPoint operating_point(const Scenario& s, const SynthDevice& d, int harmonic, double power_w,
                               double power_dbm) {
  const InjectedLoss& loss = d.loss[harmonic - 1];
  const double tls = loss.gamma_junction + (d.spec.line_tls ? loss.gamma_line : 0.0);
  const double fixed = d.spec.line_tls ? 0.0 : loss.gamma_line;
  const double q_c = 1.0 / loss.gamma_coupling;
  double n = 0.0;
  for (int it = 0; it < 50; ++it) {
    const double scale = tls_saturation(s.config, loss.frequency, n);
    const double gamma_i = fixed + tls * scale;
    const double q_l = 1.0 / (gamma_i + loss.gamma_coupling);
    const double next = photon_number(loss.frequency, q_l, q_c, power_w);
    if (std::abs(next - n) <= 1e-4 * next) {
      const double final_scale = tls_saturation(s.config, loss.frequency, next);
      const double gi = fixed + tls * final_scale;
      return {next, final_scale, gi, 1.0 / (gi + loss.gamma_coupling), q_c};
    }
    n = next;
  }
  std::ostringstream msg;
  msg << d.spec.device_id << " harmonic " << harmonic << ": photon-number iteration did not converge at "
      << power_dbm << " dBm";
  throw DataError(msg.str());
}

}  // namespace

JerCircuit design_circuit(const ScenarioConfig& config, const DeviceSpec& spec) {
  JerCircuit c;
  c.feed_z0 = config.feed_z0;
  c.c_couple = config.c_couple;
  c.l_couple = config.l_couple;
  c.temperature = config.temperature;
  const double half = config.v_ph / (4.0 * spec.bare_f0_hz);
  c.left = LineSpec{config.z0, config.v_ph, half, 0.0};
  c.right = c.left;
  c.junction.count = spec.jj_count;
  c.junction.area_each_um2 = spec.area_each_um2;
  if (spec.kind == DeviceKind::jer) {
    c.junction.l_total = spec.l_tj.value_or(
        JunctionArray::inductance_from_area(spec.jj_count, spec.area_each_um2, config.jc_ua_per_um2));
  }
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(spec.device_id + ": " + e.what());
  }
  return c;
}

Scenario build_scenario(const ScenarioConfig& config) {
  config.validate();
  Scenario scenario;
  scenario.config = config;
  for (const DeviceSpec& spec : config.devices) {
    SynthDevice d;
    d.spec = spec;
    d.circuit = design_circuit(config, spec);
    JerCircuit& c = d.circuit;

    d.design = design_check(c);
    if (spec.kind == DeviceKind::jer && !d.design.passed) {
      std::ostringstream msg;
      msg << spec.device_id << ": L_TJ is " << 100.0 * d.design.inductance_ratio
          << "% of the lumped line inductance (limit 15%)";
      throw ConfigError(msg.str());
    }
    d.harmonics = find_harmonics(c);
    if (spec.simulate) {
      const double f1 = d.harmonics.f_1h;
      const double f2 = d.harmonics.f_2h;
      inject_line_loss(c, f1, config.line_gamma, spec.device_id);
      double t1 = 0.0;
      double t2 = 0.0;
      if (spec.kind == DeviceKind::jer) {
        t1 = config.internal_rate_per_area * c.junction.total_area_um2();
        t2 = config.external_rate;
      } else if (spec.kind == DeviceKind::dummy) {
        t2 = config.dummy_external_rate;
      }
      inject_junction_loss(c, f1, f2, t1, t2, spec.device_id);
      for (int h = 1; h <= 2; ++h) {
        const double guess = harmonic_frequency(d, h);
        const double f = find_resonance_near(c, guess, 1e-4).value_or(guess);
        const ModeLoss loss = loss_at(c, f);
        if (!loss.perturbative || loss.gamma > 1e-2) {
          throw ConfigError(spec.device_id + ": injected loss outside the perturbative regime");
        }
        d.loss[h - 1] = {f, loss.gamma_line, loss.gamma_junction(), loss.gamma_coupling};
      }
    }
    scenario.devices.push_back(std::move(d));
  }
  return scenario;
}

double injected_gamma_lp(const Scenario& s, const SynthDevice& d, int harmonic) {
  const InjectedLoss& loss = d.loss[harmonic - 1];
  const double th = thermal_factor(loss.frequency, s.config.temperature);
  const double tls = loss.gamma_junction + (d.spec.line_tls ? loss.gamma_line : 0.0);
  return tls * th + (d.spec.line_tls ? 0.0 : loss.gamma_line);
}

std::vector<int> usable_powers(const Scenario& s, const SynthDevice& d, int harmonic) {
  std::vector<int> out;
  for (std::size_t k = 0; k < s.config.powers_dbm.size(); ++k) {
    const double dbm = s.config.powers_dbm[k];
    const OperatingPoint op = operating_point(s, d, harmonic, dbm_to_watts(dbm), dbm);
    if (op.photon_number <= s.config.max_photon_number) out.push_back(static_cast<int>(k));
  }
  return out;
}

SynthTrace generate_noiseless_trace(const Scenario& s, const SynthDevice& d, int harmonic, int power_index) {
  if (harmonic != 1 && harmonic != 2) throw std::invalid_argument("generate_trace: harmonic must be 1 or 2");
  if (!d.spec.simulate) throw DataError(d.spec.device_id + ": device is not simulated");
  if (power_index < 0 || power_index >= static_cast<int>(s.config.powers_dbm.size())) {
    throw std::invalid_argument("generate_trace: power index out of range");
  }
  const double dbm = s.config.powers_dbm[static_cast<std::size_t>(power_index)];
  const double power = dbm_to_watts(dbm);
  const OperatingPoint op = operating_point(s, d, harmonic, power, dbm);

  JerCircuit c = d.circuit;
  if (d.spec.line_tls) {
    c.left.alpha *= op.scale;
    c.right.alpha *= op.scale;
  }
  c.junction.r_series *= op.scale;
  c.junction.g_shunt *= op.scale;

  const double f_guess = d.loss[harmonic - 1].frequency;
  const double f_r = find_resonance_near(c, f_guess, 1e-4).value_or(f_guess);
  const double linewidth = f_r / op.q_l;
  const int n = s.config.points_per_trace;
  const double half = s.config.window_linewidths * linewidth;

  SynthTrace out;
  out.trace.device_id = d.spec.device_id;
  out.trace.harmonic = harmonic;
  out.trace.applied_power = power;
  out.trace.freqs.resize(static_cast<std::size_t>(n));
  out.trace.s21.resize(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) {
    const double f = f_r - half + 2.0 * half * k / (n - 1);
    out.trace.freqs[static_cast<std::size_t>(k)] = f;
    out.trace.s21[static_cast<std::size_t>(k)] = s21(c, f);
  }
  out.truth = {d.spec.device_id, harmonic, power_index, dbm, op.photon_number, op.scale,
               f_r, op.q_l, op.q_c, op.gamma_internal};
  return out;
}

void add_noise(PowerSweepTrace& trace, double sigma, std::uint64_t seed, int power_index) {
  if (sigma == 0.0) return;
  std::uint64_t stream = numerics::mix_seed(seed, numerics::fnv1a(trace.device_id));
  stream = numerics::mix_seed(stream, static_cast<std::uint64_t>(trace.harmonic));
  stream = numerics::mix_seed(stream, static_cast<std::uint64_t>(power_index));
  std::mt19937_64 rng(stream);
  std::normal_distribution<double> normal(0.0, sigma);
  for (cplx& z : trace.s21) {
    const double re = normal(rng);
    const double im = normal(rng);
    z += cplx{re, im};
  }
}

SynthTrace generate_trace(const Scenario& s, const SynthDevice& d, int harmonic, int power_index,
                          std::uint64_t seed) {
  SynthTrace out = generate_noiseless_trace(s, d, harmonic, power_index);
  add_noise(out.trace, s.config.noise_sigma, seed, power_index);
  return out;
}

}  // namespace jer
