#include "jer/circuit.hpp"

#include "jer/constants.hpp"
#include "jer/resonance_fit.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace jer {

using constants::pi;
using constants::two_pi;

cplx ModeProfile::junction_node_voltage() const {
  return std::abs(junction_voltage_left) >= std::abs(junction_voltage_right)
             ? junction_voltage_left
             : junction_voltage_right;
}

double ModeProfile::max_voltage() const {
  double m = std::max(std::abs(junction_voltage_left), std::abs(junction_voltage_right));
  for (const cplx& v : voltage) m = std::max(m, std::abs(v));
  return m;
}

double ModeProfile::max_current() const {
  double m = std::abs(junction_current);
  for (const cplx& i : current) m = std::max(m, std::abs(i));
  return m;
}

namespace {

std::pair<cplx, cplx> propagate_line(const LineSpec& line, double distance, double f,
                                     std::pair<cplx, cplx> state) {
  const TwoPort m = element_abcd(LineElement{line.z0, line.v_ph, distance, line.alpha}, f);
  return m.apply(state.first, state.second);
}

// Trapezoid integral of w(k) over samples [begin, end) of the profile.
template <typename F>
double trapezoid(const ModeProfile& p, std::size_t begin, std::size_t end, F&& weight) {
  double sum = 0.0;
  for (std::size_t k = begin + 1; k < end; ++k) {
    const double dx = p.positions[k] - p.positions[k - 1];
    sum += 0.5 * dx * (weight(k - 1) + weight(k));
  }
  return sum;
}

}  // namespace

ModeProfile mode_profile(const JerCircuit& circuit, double mode_f, int n_points) {
  circuit.validate();
  if (n_points < 4) throw std::invalid_argument("mode_profile: need at least 4 points");
  if (!(mode_f > 0)) throw std::invalid_argument("mode_profile: frequency must be > 0");

  auto resonance = find_resonance_near(circuit, mode_f, 2e-3);
  if (!resonance) resonance = find_resonance_near(circuit, mode_f, 2e-2);
  if (!resonance) throw std::invalid_argument("mode_profile: no resonance near the requested frequency");
  const double linewidth = estimate_linewidth(circuit, *resonance);
  if (std::abs(mode_f - *resonance) > std::max(10.0 * linewidth, 10.0)) {
    throw std::invalid_argument("mode_profile: frequency is not within 10 linewidths of a resonance");
  }

  const JunctionArray& j = circuit.junction;
  const double omega = two_pi * mode_f;
  const cplx half_shunt{0.5 * j.g_shunt, 0.5 * omega * j.c_shunt};
  const cplx series{j.r_series, omega * j.l_total};

  const std::size_t n_left = static_cast<std::size_t>(n_points / 2);
  const std::size_t n_right = static_cast<std::size_t>(n_points) - n_left;
  const double x_junction = circuit.left.length;
  const double x_end = circuit.total_length();

  ModeProfile p;
  p.frequency = mode_f;
  p.left_samples = n_left;
  p.positions.resize(n_left + n_right);
  p.voltage.resize(n_left + n_right);
  p.current.resize(n_left + n_right);

  const std::pair<cplx, cplx> open_end{1.0, 0.0};
  for (std::size_t k = 0; k < n_right; ++k) {
    const double x = x_junction + circuit.right.length * static_cast<double>(k) / (n_right - 1);
    const auto [v, i] = propagate_line(circuit.right, x_end - x, mode_f, open_end);
    p.positions[n_left + k] = x;
    p.voltage[n_left + k] = v;
    p.current[n_left + k] = i;
  }

  // Junction network: shunt/2, series, shunt/2 traversed from the right electrode.
  const cplx v_right = p.voltage[n_left];
  const cplx i_series = p.current[n_left] + half_shunt * v_right;
  const cplx v_left = v_right + series * i_series;
  const cplx i_left = i_series + half_shunt * v_left;
  p.junction_voltage_right = v_right;
  p.junction_voltage_left = v_left;
  p.junction_current = i_series;

  for (std::size_t k = 0; k < n_left; ++k) {
    const double x = circuit.left.length * static_cast<double>(k) / (n_left - 1);
    const auto [v, i] = propagate_line(circuit.left, x_junction - x, mode_f, {v_left, i_left});
    p.positions[k] = x;
    p.voltage[k] = v;
    p.current[k] = i;
  }
  p.coupler_current = p.current.front();
  return p;
}

ModeEnergy mode_energy(const ModeProfile& p, const JerCircuit& circuit) {
  ModeEnergy e;
  const std::size_t n = p.positions.size();
  const std::size_t split = p.left_samples;
  auto segment = [&](const LineSpec& line, std::size_t begin, std::size_t end) {
    const double lp = line.inductance_per_length();
    const double cp = line.capacitance_per_length();
    e.line_magnetic += trapezoid(p, begin, end, [&](std::size_t k) {
      return 0.25 * lp * std::norm(p.current[k]);
    });
    e.line_electric += trapezoid(p, begin, end, [&](std::size_t k) {
      return 0.25 * cp * std::norm(p.voltage[k]);
    });
  };
  segment(circuit.left, 0, split);
  segment(circuit.right, split, n);
  e.line = e.line_magnetic + e.line_electric;

  const JunctionArray& j = circuit.junction;
  e.junction_inductive = 0.25 * j.l_total * std::norm(p.junction_current);
  e.junction_shunt_electric = 0.25 * 0.5 * j.c_shunt *
                              (std::norm(p.junction_voltage_left) + std::norm(p.junction_voltage_right));
  if (!circuit.decoupled()) {
    const double omega = two_pi * p.frequency;
    const double i2 = std::norm(p.coupler_current);
    e.coupler = 0.25 * circuit.l_couple * i2 + 0.25 * i2 / (omega * omega * circuit.c_couple);
  }
  return e;
}

ParticipationRatios participation_ratios(const ModeProfile& profile, const JerCircuit& circuit) {
  const ModeEnergy e = mode_energy(profile, circuit);
  const double total = e.total();
  if (!(total > 0) || !std::isfinite(total)) {
    throw std::invalid_argument("participation_ratios: profile carries no energy");
  }
  return {e.junction_inductive / total, e.junction_shunt_electric / total, e.line / total,
          e.coupler / total};
}

ModeLoss predict_mode_loss(const JerCircuit& circuit, double mode_f) {
  const ModeProfile p = mode_profile(circuit, mode_f);
  const ModeEnergy e = mode_energy(p, circuit);
  const double omega_e = two_pi * mode_f * e.total();
  if (!(omega_e > 0)) throw std::invalid_argument("predict_mode_loss: zero stored energy");

  // Distortionless line: R' = alpha z0, G' = alpha / z0.
  auto line_power = [&](const LineSpec& line, std::size_t begin, std::size_t end) {
    return trapezoid(p, begin, end, [&](std::size_t k) {
      return 0.5 * line.alpha * (line.z0 * std::norm(p.current[k]) + std::norm(p.voltage[k]) / line.z0);
    });
  };
  const double p_line = line_power(circuit.left, 0, p.left_samples) +
                        line_power(circuit.right, p.left_samples, p.positions.size());
  const JunctionArray& j = circuit.junction;
  const double p_series = 0.5 * j.r_series * std::norm(p.junction_current);
  const double p_shunt = 0.5 * 0.5 * j.g_shunt *
                         (std::norm(p.junction_voltage_left) + std::norm(p.junction_voltage_right));
  const double p_coupling =
      circuit.decoupled() ? 0.0 : 0.5 * 0.5 * circuit.feed_z0 * std::norm(p.coupler_current);

  ModeLoss loss;
  loss.gamma_line = p_line / omega_e;
  loss.gamma_series = p_series / omega_e;
  loss.gamma_shunt = p_shunt / omega_e;
  loss.gamma_coupling = p_coupling / omega_e;
  loss.gamma = loss.gamma_line + loss.gamma_series + loss.gamma_shunt;

  if (loss.gamma > 1e-2 && !circuit.decoupled()) {
    // Outside the perturbative regime: fit the simulated notch instead.
    const double lw = std::max(estimate_linewidth(circuit, mode_f), mode_f * 1e-6);
    PowerSweepTrace trace;
    trace.applied_power = 1e-18;
    trace.harmonic = 1;
    const int n = 1001;
    for (int k = 0; k < n; ++k) {
      const double f = mode_f + lw * (-10.0 + 20.0 * k / (n - 1));
      trace.freqs.push_back(f);
      trace.s21.push_back(s21(circuit, f));
    }
    const ResonanceFit fit = fit_notch(trace);
    loss.gamma = fit.gamma;
    loss.perturbative = false;
    loss.warning = "loss outside the perturbative regime; Gamma taken from a notch fit of S21";
  }
  return loss;
}

double effective_lumped_inductance(const JerCircuit& circuit) {
  return 2.0 / (pi * pi) * circuit.left.inductance_per_length() * circuit.total_length();
}

DesignReport design_check(const JerCircuit& circuit) {
  circuit.validate();
  DesignReport report;
  report.inductance_ratio = circuit.junction.l_total / effective_lumped_inductance(circuit);
  report.passed = report.inductance_ratio <= kMaxInductanceRatio * (1.0 + 1e-12);

  JerCircuit ideal = circuit;
  ideal.c_couple = 0.0;
  ideal.l_couple = 0.0;
  ideal.left.alpha = ideal.right.alpha = 0.0;
  ideal.junction.r_series = ideal.junction.g_shunt = 0.0;

  const double f_guess =
      transcendental_modes(ideal.left, ideal.right, ideal.junction.l_total).f_1h;
  auto f_1h = find_resonance_near(ideal, f_guess, 0.05);
  if (!f_1h) f_1h = f_guess;
  const ModeProfile p = mode_profile(ideal, *f_1h);
  const double v_max = p.max_voltage();
  report.voltage_drop_ratio = std::abs(p.junction_voltage_drop()) / v_max;
  report.node_voltage_ratio = std::abs(p.junction_node_voltage()) / v_max;
  return report;
}

}  // namespace jer
