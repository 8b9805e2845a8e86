#pragma once

#include "jer/two_port.hpp"

#include <optional>
#include <string>
#include <vector>

namespace jer {

/// Distributed parameters of one uniform line section.
struct LineSpec {
  double z0 = 50.0;      // ohm
  double v_ph = 1.2e8;   // m/s
  double length = 0.0;   // m
  double alpha = 0.0;    // Np/m

  void validate() const;
  double half_wave_frequency() const { return v_ph / (2.0 * length); }
  double inductance_per_length() const { return z0 / v_ph; }
  double capacitance_per_length() const { return 1.0 / (z0 * v_ph); }
  LineElement element() const { return {z0, v_ph, length, alpha}; }
};

/// Series array of junctions treated as one linear inductor with two loss
/// channels: r_series (driven by the junction current) and g_shunt (driven by
/// the electrode-to-ground voltage, split half on each electrode).
struct JunctionArray {
  int count = 0;               // 0 for the dummy stripe / no junction
  double area_each_um2 = 0.0;  // um^2
  double l_total = 0.0;        // H
  double r_series = 0.0;       // ohm
  double g_shunt = 0.0;        // S
  double c_shunt = 0.0;        // F

  void validate() const;
  double total_area_um2() const { return count * area_each_um2; }
  bool is_dummy() const { return count == 0; }

  /// L_J = Phi0 / (2 pi Jc A) per junction, summed over a series array.
  static double inductance_from_area(int count, double area_each_um2, double jc_ua_per_um2);
};

struct JerCircuit {
  double feed_z0 = 50.0;   // ohm
  double c_couple = 0.0;   // F; 0 gives the decoupled ideal
  double l_couple = 0.0;   // H; self-inductance of the coupler, in series with c_couple
  LineSpec left;
  LineSpec right;
  JunctionArray junction;
  double temperature = 0.015;  // K

  void validate() const;
  bool decoupled() const { return c_couple == 0.0; }
  double total_length() const { return left.length + right.length; }
};

struct HarmonicPair {
  double f_1h = 0.0;
  double f_2h = 0.0;
  double delta() const { return 0.5 * f_2h - f_1h; }
};

/// Resonator elements from the coupled end to the far open end. The coupler
/// element is omitted when include_coupler is false or the circuit is decoupled.
std::vector<NetworkElement> circuit_elements(const JerCircuit& circuit, double freq_hz,
                                             bool include_coupler = true);

/// Impedance of the branch hanging off the feedline: coupler -> left line ->
/// junction network -> right line -> open end (A/C of the cascade).
/// std::nullopt is the divergent (open) sentinel, e.g. for c_couple = 0.
std::optional<cplx> branch_impedance(const JerCircuit& circuit, double freq_hz);

/// Input admittance of the bare resonator seen at the coupled end (C/A).
cplx resonator_admittance(const JerCircuit& circuit, double freq_hz);

/// Notch transmission past the shunt branch, S21 = 2 Zb / (2 Zb + Z0).
cplx s21(const JerCircuit& circuit, double freq_hz);

struct HarmonicSearch {
  int grid_points = 20001;
  double tolerance_hz = 1.0;
};

/// Every resonance in [f_lo, f_hi], ascending.
std::vector<double> find_resonances(const JerCircuit& circuit, double f_lo, double f_hi,
                                    const HarmonicSearch& search = {});

/// Exactly the first two resonances in the band; throws DataError listing the
/// candidates otherwise.
HarmonicPair find_harmonics(const JerCircuit& circuit, double f_lo, double f_hi,
                            const HarmonicSearch& search = {});

/// Default search band [0.5, 2.5] x the bare half-wave frequency.
HarmonicPair find_harmonics(const JerCircuit& circuit, const HarmonicSearch& search = {});

/// Resonance closest to f_guess within a relative span.
std::optional<double> find_resonance_near(const JerCircuit& circuit, double f_guess,
                                          double relative_span = 0.02,
                                          double tolerance_hz = 1.0);

/// Loaded linewidth (Hz) from the reactance slope of the branch at a
/// resonance; 0 for a lossless decoupled circuit.
double estimate_linewidth(const JerCircuit& circuit, double f_res);

/// Decoupled lossless oracle: odd mode from omega*L = 2 z0 cot(beta l / 2),
/// even mode at v_ph / l.
HarmonicPair transcendental_modes(const LineSpec& left, const LineSpec& right, double l_tj);

struct InductanceEstimate {
  double l_tj = 0.0;
  bool within_coupling_systematics = false;  // f_1h >= f_2h/2 beyond tolerance; clamped to 0
};

/// Closed-form inversion L = 2 z0 cot(pi f1/f2) / (2 pi f1).
InductanceEstimate invert_l_tj(double f_1h, double f_2h, double z0, double tolerance_hz = 10.0);

/// Refines L_TJ on the coupled circuit so that the simulated f_1h matches the
/// measured value within tolerance_hz. `design` supplies everything but L_TJ.
InductanceEstimate invert_l_tj_coupled(const JerCircuit& design, double f_1h_measured,
                                       double tolerance_hz = 1e3);

/// Standing-wave distribution of one mode, propagated from the far open end
/// (V = 1 V, I = 0) toward the coupled end.
///
/// Samples of the left line come first, then the right line; the junction
/// position appears twice, once per electrode. Currents flow toward +x.
struct ModeProfile {
  double frequency = 0.0;
  std::vector<double> positions;
  std::vector<cplx> voltage;
  std::vector<cplx> current;
  std::size_t left_samples = 0;
  cplx junction_current;
  cplx junction_voltage_left;
  cplx junction_voltage_right;
  cplx coupler_current;  // current entering the resonator at x = 0

  /// Larger of the two electrode-to-ground voltages.
  cplx junction_node_voltage() const;
  cplx junction_voltage_drop() const { return junction_voltage_left - junction_voltage_right; }
  double max_voltage() const;
  double max_current() const;
};

/// Throws std::invalid_argument if mode_f is not within 10 linewidths of a
/// resonance of the circuit.
ModeProfile mode_profile(const JerCircuit& circuit, double mode_f, int n_points = 2001);

/// Time-averaged stored energy, split by where it resides.
struct ModeEnergy {
  double line = 0.0;
  double junction_inductive = 0.0;
  double junction_shunt_electric = 0.0;
  double coupler = 0.0;
  double line_electric = 0.0;
  double line_magnetic = 0.0;
  double total() const { return line + junction_inductive + junction_shunt_electric + coupler; }
};

ModeEnergy mode_energy(const ModeProfile& profile, const JerCircuit& circuit);

struct ParticipationRatios {
  double inductive = 0.0;       // L_TJ
  double shunt_electric = 0.0;  // junction c_shunt
  double line = 0.0;
  double coupler = 0.0;
};

ParticipationRatios participation_ratios(const ModeProfile& profile, const JerCircuit& circuit);

/// Perturbative loss budget Gamma = P / (omega E) of one mode.
struct ModeLoss {
  double gamma = 0.0;           // internal, = 1/Q_i
  double gamma_line = 0.0;
  double gamma_series = 0.0;    // r_series channel
  double gamma_shunt = 0.0;     // g_shunt channel
  double gamma_coupling = 0.0;  // = 1/Q_c (feedline load)
  bool perturbative = true;
  std::string warning;
  double gamma_junction() const { return gamma_series + gamma_shunt; }
};

ModeLoss predict_mode_loss(const JerCircuit& circuit, double mode_f);

struct DesignReport {
  double inductance_ratio = 0.0;    // L_TJ / L_eff
  double voltage_drop_ratio = 0.0;  // |V_L - V_R| / max|V|, 1st harmonic
  double node_voltage_ratio = 0.0;  // max(|V_L|, |V_R|) / max|V|, 1st harmonic
  bool passed = true;
};

inline constexpr double kMaxInductanceRatio = 0.15;

/// L_eff = (2 / pi^2) L' l for the fundamental.
double effective_lumped_inductance(const JerCircuit& circuit);

DesignReport design_check(const JerCircuit& circuit);

}  // namespace jer
