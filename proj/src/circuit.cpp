#include "jer/circuit.hpp"

#include "jer/constants.hpp"
#include "jer/error.hpp"
#include "jer/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace jer {

using constants::pi;
using constants::two_pi;

void LineSpec::validate() const {
  if (!(z0 > 0) || !std::isfinite(z0)) throw std::invalid_argument("LineSpec: z0 must be > 0");
  if (!(v_ph > 0) || !std::isfinite(v_ph)) throw std::invalid_argument("LineSpec: v_ph must be > 0");
  if (!(length > 0) || !std::isfinite(length)) {
    throw std::invalid_argument("LineSpec: length must be > 0");
  }
  if (!(alpha >= 0) || !std::isfinite(alpha)) {
    throw std::invalid_argument("LineSpec: alpha must be >= 0");
  }
}

void JunctionArray::validate() const {
  if (count < 0) throw std::invalid_argument("JunctionArray: count must be >= 0");
  if (count > 0 && count % 2 != 0) {
    throw std::invalid_argument("JunctionArray: junction count must be even");
  }
  if (!(area_each_um2 >= 0) || !std::isfinite(area_each_um2)) {
    throw std::invalid_argument("JunctionArray: area must be >= 0");
  }
  if (count == 0 && area_each_um2 != 0.0) {
    throw std::invalid_argument("JunctionArray: dummy junction must have zero area");
  }
  if (count > 0 && !(area_each_um2 > 0)) {
    throw std::invalid_argument("JunctionArray: real junctions need a positive area");
  }
  if (!(l_total >= 0) || !std::isfinite(l_total)) {
    throw std::invalid_argument("JunctionArray: l_total must be >= 0");
  }
  if (!(r_series >= 0) || !std::isfinite(r_series)) {
    throw std::invalid_argument("JunctionArray: r_series must be >= 0 (passive)");
  }
  if (!(g_shunt >= 0) || !std::isfinite(g_shunt)) {
    throw std::invalid_argument("JunctionArray: g_shunt must be >= 0 (passive)");
  }
  if (!(c_shunt >= 0) || !std::isfinite(c_shunt)) {
    throw std::invalid_argument("JunctionArray: c_shunt must be >= 0");
  }
}

double JunctionArray::inductance_from_area(int count, double area_each_um2, double jc_ua_per_um2) {
  if (count == 0) return 0.0;
  if (!(area_each_um2 > 0) || !(jc_ua_per_um2 > 0)) {
    throw std::invalid_argument("inductance_from_area: area and Jc must be > 0");
  }
  const double ic = jc_ua_per_um2 * 1e-6 * area_each_um2;  // A
  return count * constants::flux_quantum / (two_pi * ic);
}

void JerCircuit::validate() const {
  if (!(feed_z0 > 0)) throw std::invalid_argument("JerCircuit: feed_z0 must be > 0");
  if (!(c_couple >= 0) || !std::isfinite(c_couple)) {
    throw std::invalid_argument("JerCircuit: c_couple must be >= 0");
  }
  if (!(l_couple >= 0) || !std::isfinite(l_couple)) {
    throw std::invalid_argument("JerCircuit: l_couple must be >= 0");
  }
  left.validate();
  right.validate();
  junction.validate();
  if (std::abs(left.length - right.length) > 1e-9 * (left.length + right.length)) {
    throw std::invalid_argument("JerCircuit: junction must sit in the middle (equal half lengths)");
  }
  if (!(temperature > 0)) throw std::invalid_argument("JerCircuit: temperature must be > 0");
}

std::vector<NetworkElement> circuit_elements(const JerCircuit& circuit, double freq_hz,
                                             bool include_coupler) {
  const double omega = two_pi * freq_hz;
  const JunctionArray& j = circuit.junction;
  const cplx half_shunt{0.5 * j.g_shunt, 0.5 * omega * j.c_shunt};
  const cplx series{j.r_series, omega * j.l_total};

  std::vector<NetworkElement> elements;
  elements.reserve(6);
  if (include_coupler && !circuit.decoupled()) {
    elements.emplace_back(
        SeriesElement{cplx{0.0, omega * circuit.l_couple - 1.0 / (omega * circuit.c_couple)}});
  }
  elements.emplace_back(circuit.left.element());
  elements.emplace_back(ShuntElement{half_shunt});
  elements.emplace_back(SeriesElement{series});
  elements.emplace_back(ShuntElement{half_shunt});
  elements.emplace_back(circuit.right.element());
  return elements;
}

std::optional<cplx> branch_impedance(const JerCircuit& circuit, double freq_hz) {
  if (!(freq_hz > 0)) throw std::invalid_argument("branch_impedance: frequency must be > 0");
  if (circuit.decoupled()) return std::nullopt;
  const auto elements = circuit_elements(circuit, freq_hz);
  const TwoPort m = abcd_cascade(elements, freq_hz);
  if (m.c() == cplx{0.0, 0.0}) return std::nullopt;
  return m.a() / m.c();
}

cplx resonator_admittance(const JerCircuit& circuit, double freq_hz) {
  if (!(freq_hz > 0)) throw std::invalid_argument("resonator_admittance: frequency must be > 0");
  const auto elements = circuit_elements(circuit, freq_hz, false);
  const TwoPort m = abcd_cascade(elements, freq_hz);
  return m.c() / m.a();
}

cplx s21(const JerCircuit& circuit, double freq_hz) {
  if (circuit.junction.r_series < 0 || circuit.junction.g_shunt < 0 || circuit.left.alpha < 0 ||
      circuit.right.alpha < 0) {
    throw std::invalid_argument("s21: non-passive parameters");
  }
  const auto zb = branch_impedance(circuit, freq_hz);
  if (!zb) return {1.0, 0.0};
  return 2.0 * *zb / (2.0 * *zb + circuit.feed_z0);
}

namespace {

// Quantity whose upward zero crossings mark resonances: the branch reactance
// for a coupled circuit, the resonator susceptance for a decoupled one. Both
// increase monotonically between poles for lossless networks.
double detection_value(const JerCircuit& circuit, double f) {
  if (circuit.decoupled()) return resonator_admittance(circuit, f).imag();
  const auto zb = branch_impedance(circuit, f);
  return zb ? zb->imag() : std::numeric_limits<double>::infinity();
}

// Quantity minimised at the dip.
double dip_metric(const JerCircuit& circuit, double f) {
  if (circuit.decoupled()) return std::norm(resonator_admittance(circuit, f));
  return std::abs(s21(circuit, f));
}

std::vector<std::pair<double, double>> upward_crossings(const JerCircuit& circuit, double f_lo,
                                                       double f_hi, int points) {
  std::vector<std::pair<double, double>> brackets;
  double prev_f = f_lo;
  double prev_v = detection_value(circuit, f_lo);
  for (int i = 1; i < points; ++i) {
    const double f = f_lo + (f_hi - f_lo) * i / (points - 1);
    const double v = detection_value(circuit, f);
    if (prev_v < 0 && v >= 0 && std::isfinite(v)) {
      brackets.emplace_back(prev_f, f);
    }
    prev_f = f;
    prev_v = v;
  }
  return brackets;
}

double refine_resonance(const JerCircuit& circuit, double lo, double hi, double tol_hz) {
  auto g = [&](double f) { return detection_value(circuit, f); };
  const double root = numerics::find_root(g, lo, hi, std::min(1e-4, 1e-3 * tol_hz));
  const double lw = estimate_linewidth(circuit, root);
  const double half = std::max(3.0 * lw, 10.0 * tol_hz);
  auto m = [&](double f) { return dip_metric(circuit, f); };
  return numerics::minimize_bracketed(m, root - half, root + half, tol_hz);
}

}  // namespace

double estimate_linewidth(const JerCircuit& circuit, double f_res) {
  const double h = std::max(1e-8 * f_res, 1.0);
  if (circuit.decoupled()) {
    const cplx y = resonator_admittance(circuit, f_res);
    const double slope =
        (resonator_admittance(circuit, f_res + h).imag() -
         resonator_admittance(circuit, f_res - h).imag()) / (2.0 * h);
    if (!(y.real() > 0) || !(slope > 0)) return 0.0;
    return 2.0 * y.real() / slope;
  }
  const auto z = branch_impedance(circuit, f_res);
  const auto zp = branch_impedance(circuit, f_res + h);
  const auto zm = branch_impedance(circuit, f_res - h);
  if (!z || !zp || !zm) return 0.0;
  const double slope = (zp->imag() - zm->imag()) / (2.0 * h);
  if (!(slope > 0)) return 0.0;
  return 2.0 * (z->real() + 0.5 * circuit.feed_z0) / slope;
}

std::vector<double> find_resonances(const JerCircuit& circuit, double f_lo, double f_hi,
                                    const HarmonicSearch& search) {
  if (!(f_lo > 0) || !(f_hi > f_lo)) throw std::invalid_argument("find_resonances: bad band");
  if (search.grid_points < 3) throw std::invalid_argument("find_resonances: grid too coarse");
  const auto brackets = upward_crossings(circuit, f_lo, f_hi, search.grid_points);
  std::vector<double> found;
  found.reserve(brackets.size());
  for (const auto& [lo, hi] : brackets) {
    found.push_back(refine_resonance(circuit, lo, hi, search.tolerance_hz));
  }
  std::sort(found.begin(), found.end());
  return found;
}

HarmonicPair find_harmonics(const JerCircuit& circuit, double f_lo, double f_hi,
                            const HarmonicSearch& search) {
  const auto found = find_resonances(circuit, f_lo, f_hi, search);
  if (found.size() != 2) {
    std::ostringstream msg;
    msg << "find_harmonics: expected exactly 2 resonances in [" << f_lo << ", " << f_hi
        << "] Hz, found " << found.size();
    if (!found.empty()) {
      msg << ":";
      for (double f : found) msg << ' ' << f;
    }
    throw DataError(msg.str());
  }
  return {found[0], found[1]};
}

HarmonicPair find_harmonics(const JerCircuit& circuit, const HarmonicSearch& search) {
  const double f0 = circuit.left.v_ph / (2.0 * circuit.total_length());
  return find_harmonics(circuit, 0.5 * f0, 2.5 * f0, search);
}

std::optional<double> find_resonance_near(const JerCircuit& circuit, double f_guess,
                                          double relative_span, double tolerance_hz) {
  const double lo = f_guess * (1.0 - relative_span);
  const double hi = f_guess * (1.0 + relative_span);
  const auto brackets = upward_crossings(circuit, lo, hi, 401);
  if (brackets.empty()) return std::nullopt;
  const auto nearest = std::min_element(
      brackets.begin(), brackets.end(), [f_guess](const auto& a, const auto& b) {
        return std::abs(0.5 * (a.first + a.second) - f_guess) <
               std::abs(0.5 * (b.first + b.second) - f_guess);
      });
  return refine_resonance(circuit, nearest->first, nearest->second, tolerance_hz);
}

HarmonicPair transcendental_modes(const LineSpec& left, const LineSpec& right, double l_tj) {
  left.validate();
  right.validate();
  if (std::abs(left.length - right.length) > 1e-9 * (left.length + right.length) ||
      left.z0 != right.z0 || left.v_ph != right.v_ph) {
    throw std::invalid_argument("transcendental_modes: halves must be identical");
  }
  if (!(l_tj >= 0) || !std::isfinite(l_tj)) {
    throw std::invalid_argument("transcendental_modes: no odd-mode root (inductance must be finite, >= 0)");
  }
  const double length = left.length + right.length;
  const double f2 = left.v_ph / length;
  if (l_tj == 0.0) return {0.5 * f2, f2};
  const double z0 = left.z0;
  // omega L sin(x) - 2 z0 cos(x) with x = pi f / f2; increasing on (0, f2/2].
  auto g = [&](double f) {
    const double x = pi * f / f2;
    return two_pi * f * l_tj * std::sin(x) - 2.0 * z0 * std::cos(x);
  };
  const double f1 = numerics::bisect_root(g, 0.0, 0.5 * f2, 1e-3);
  return {f1, f2};
}

InductanceEstimate invert_l_tj(double f_1h, double f_2h, double z0, double tolerance_hz) {
  if (!(f_1h > 0) || !(f_2h > 0) || !(z0 > 0)) {
    throw std::invalid_argument("invert_l_tj: frequencies and z0 must be > 0");
  }
  if (f_1h >= 0.5 * f_2h) {
    return {0.0, (f_1h - 0.5 * f_2h) > tolerance_hz};
  }
  const double x = pi * f_1h / f_2h;
  return {2.0 * z0 / std::tan(x) / (two_pi * f_1h), false};
}

InductanceEstimate invert_l_tj_coupled(const JerCircuit& design, double f_1h_measured,
                                       double tolerance_hz) {
  design.validate();
  JerCircuit c = design;
  auto simulated_f1 = [&](double l_tj) {
    c.junction.l_total = l_tj;
    // the coupler pulls the mode by far less than the search span
    const double guess = transcendental_modes(c.left, c.right, l_tj).f_1h;
    const auto f = find_resonance_near(c, guess, 0.02, std::min(1.0, tolerance_hz));
    if (!f) {
      throw std::invalid_argument("invert_l_tj_coupled: no 1st-harmonic resonance near the measurement");
    }
    return *f;
  };
  const double f_at_zero = simulated_f1(0.0);
  if (f_1h_measured >= f_at_zero) {
    return {0.0, (f_1h_measured - f_at_zero) > tolerance_hz};
  }
  const double f2_guess = design.left.v_ph / design.total_length();
  double hi = std::max(2.0 * invert_l_tj(f_1h_measured, f2_guess, design.left.z0).l_tj, 1e-12);
  while (simulated_f1(hi) > f_1h_measured) {
    hi *= 2.0;
    if (hi > 1e-6) throw std::invalid_argument("invert_l_tj_coupled: inductance diverges");
  }
  auto h = [&](double l_tj) { return simulated_f1(l_tj) - f_1h_measured; };
  // Absolute L tolerance mapped from the frequency tolerance via the local slope.
  const double slope = std::abs(h(hi) - h(0.0)) / hi;
  const double l_tol = 0.1 * tolerance_hz / std::max(slope, 1e-300);
  const double l = numerics::find_root(h, 0.0, hi, l_tol);
  return {l, false};
}

}  // namespace jer
