#include "jer/circuit.hpp"
#include "jer/error.hpp"
#include "jer/resonance_fit.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

namespace jer {
namespace {

using test::make_circuit;
using test::rel;

constexpr double kV = 1.2e8;

TEST(Circuit, DecoupledBranchIsDivergentAndS21IsUnity) {
  const JerCircuit c = make_circuit(90.0, 6e9, 0.1e-9);
  EXPECT_FALSE(branch_impedance(c, 5.9e9).has_value());
  EXPECT_EQ(s21(c, 5.9e9), cplx(1.0));
}

TEST(Circuit, DummyAdmittanceMatchesContinuousOpenLine) {
  const JerCircuit c = make_circuit(75.0, 6e9, 0.0);
  for (double f : {1.3e9, 4.1e9, 5.7e9, 9.2e9}) {
    const double beta = constants::two_pi * f / kV;
    const cplx expected(0.0, std::tan(beta * c.total_length()) / 75.0);
    EXPECT_LT(std::abs(resonator_admittance(c, f) - expected), 1e-9 * std::abs(expected)) << f;
  }
}

TEST(Circuit, DummyWithCouplerMatchesSeriesOracle) {
  JerCircuit c = make_circuit(75.0, 6e9, 0.0, 2e-15);
  for (double f : {2.2e9, 5.95e9, 8.4e9}) {
    const double w = constants::two_pi * f;
    const double beta = w / kV;
    const cplx y_line(0.0, std::tan(beta * c.total_length()) / 75.0);
    const cplx expected = cplx(0.0, w * c.l_couple - 1.0 / (w * c.c_couple)) + 1.0 / y_line;
    const auto zb = branch_impedance(c, f);
    ASSERT_TRUE(zb.has_value());
    EXPECT_LT(std::abs(*zb - expected), 1e-9 * std::abs(expected)) << f;
  }
}

TEST(Circuit, LossyCoupledS21IsPassive) {
  JerCircuit c = make_circuit(90.0, 6e9, 0.07e-9, 1e-15);
  c.left.alpha = c.right.alpha = 1e-3;
  c.junction.r_series = 0.05;
  c.junction.g_shunt = 1e-6;
  const double f1 = find_harmonics(c).f_1h;
  double worst = 0.0;
  for (int k = -2000; k <= 2000; ++k) {
    worst = std::max(worst, std::abs(s21(c, f1 * (1.0 + k * 1e-7))));
  }
  for (double f = 1e9; f < 14e9; f += 7.3e6) worst = std::max(worst, std::abs(s21(c, f)));
  EXPECT_LE(worst, 1.0 + 1e-9);
  EXPECT_NEAR(std::abs(s21(c, 3e9)), 1.0, 1e-3);
}

TEST(Circuit, IdealDummyHarmonics) {
  const JerCircuit c = make_circuit(90.0, 6e9, 0.0);
  const HarmonicPair h = find_harmonics(c);
  EXPECT_NEAR(h.f_1h, 6e9, 2.0);
  EXPECT_NEAR(h.f_2h, 12e9, 2.0);
  EXPECT_NEAR(h.delta(), 0.0, 2.0);
}

TEST(Circuit, TranscendentalZeroInductanceIsBareHalfWave) {
  const JerCircuit c = make_circuit(90.0, 6e9, 0.0);
  const HarmonicPair h = transcendental_modes(c.left, c.right, 0.0);
  EXPECT_NEAR(h.f_1h, kV / (2.0 * c.total_length()), 1e-3);
  EXPECT_NEAR(h.f_2h, kV / c.total_length(), 1e-3);
}

TEST(Circuit, SolverAgreesWithTranscendentalOracle) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> l_dist(0.0, 1e-9), z_dist(50.0, 120.0);
  for (int i = 0; i < 8; ++i) {
    const double l = l_dist(rng), z0 = z_dist(rng);
    const JerCircuit c = make_circuit(z0, 6e9, l);
    const HarmonicPair num = find_harmonics(c);
    const HarmonicPair ref = transcendental_modes(c.left, c.right, l);
    EXPECT_NEAR(num.f_1h, ref.f_1h, 10.0) << "L=" << l << " z0=" << z0;
    EXPECT_NEAR(num.f_2h, ref.f_2h, 10.0);
  }
}

TEST(Circuit, MeasuredScaleDeviceResonatesNear58GHz) {
  // total length chosen so the unperturbed even mode sits at 11.8 GHz
  const JerCircuit c = make_circuit(80.0, 5.9e9, 0.23e-9);
  const HarmonicPair ref = transcendental_modes(c.left, c.right, 0.23e-9);
  const HarmonicPair num = find_harmonics(c);
  EXPECT_NEAR(num.f_2h, 11.8e9, 1e3);
  EXPECT_NEAR(num.f_1h, ref.f_1h, 10.0);
  EXPECT_GT(num.f_1h, 5.5e9);
  EXPECT_LT(num.f_1h, 5.9e9);
  EXPECT_GT(num.delta(), 0.0);
  const HarmonicPair bigger = find_harmonics(make_circuit(80.0, 5.9e9, 0.3e-9));
  EXPECT_GT(bigger.delta(), num.delta());
}

TEST(Circuit, CoupledDummyHasNegativeDelta) {
  const JerCircuit c = make_circuit(90.0, 6e9, 0.0, 1e-15);
  const HarmonicPair h = find_harmonics(c);
  EXPECT_LT(h.delta(), 0.0);
}

TEST(Circuit, EvenModeIgnoresJunctionInductance) {
  const HarmonicPair a = find_harmonics(make_circuit(90.0, 6e9, 0.1e-9));
  const HarmonicPair b = find_harmonics(make_circuit(90.0, 6e9, 0.2e-9));
  EXPECT_EQ(a.f_2h, b.f_2h);
  EXPECT_GT(rel(a.f_1h, b.f_1h), 1e-3);

  const HarmonicPair ca = find_harmonics(make_circuit(90.0, 6e9, 0.1e-9, 1e-15));
  const HarmonicPair cb = find_harmonics(make_circuit(90.0, 6e9, 0.2e-9, 1e-15));
  EXPECT_LT(rel(ca.f_2h, cb.f_2h), 1e-5);
  EXPECT_GT(rel(ca.f_1h, cb.f_1h), 1e-3);
}

TEST(Circuit, ClosedFormInversionRoundTrip) {
  const JerCircuit c = make_circuit(90.0, 6e9, 0.5e-9);
  const HarmonicPair h = transcendental_modes(c.left, c.right, 0.5e-9);
  const InductanceEstimate est = invert_l_tj(h.f_1h, h.f_2h, 90.0);
  EXPECT_LT(rel(est.l_tj, 0.5e-9), 1e-4);
  EXPECT_FALSE(est.within_coupling_systematics);
}

TEST(Circuit, InversionAtHalfEvenModeIsZero) {
  const InductanceEstimate est = invert_l_tj(6e9, 12e9, 90.0);
  EXPECT_NEAR(est.l_tj, 0.0, 1e-25);
  const InductanceEstimate neg = invert_l_tj(6.001e9, 12e9, 90.0);
  EXPECT_EQ(neg.l_tj, 0.0);
  EXPECT_TRUE(neg.within_coupling_systematics);
}

TEST(Circuit, CoupledInversionRecoversInjectedInductance) {
  JerCircuit c = make_circuit(90.0, 6e9, 0.066e-9, 1e-15);
  const double f1 = find_harmonics(c).f_1h;
  JerCircuit design = c;
  design.junction.l_total = 0.0;
  const InductanceEstimate est = invert_l_tj_coupled(design, f1, 1.0);
  EXPECT_LT(rel(est.l_tj, 0.066e-9), 1e-4);
}

TEST(Circuit, DummyFundamentalIsCosineStandingWave) {
  const JerCircuit c = make_circuit(90.0, 6e9, 0.0);
  const double f1 = find_harmonics(c).f_1h;
  const ModeProfile p = mode_profile(c, f1, 801);
  const double vmax = p.max_voltage();
  const double len = c.total_length();
  for (std::size_t i = 0; i < p.positions.size(); ++i) {
    const double expected = std::abs(std::cos(constants::pi * p.positions[i] / len));
    EXPECT_NEAR(std::abs(p.voltage[i]) / vmax, expected, 1e-6) << i;
  }
}

TEST(Circuit, SecondHarmonicHasCurrentNodeAtJunction) {
  const JerCircuit c = make_circuit(90.0, 6e9, 0.2e-9);
  const double f2 = find_harmonics(c).f_2h;
  const ModeProfile p = mode_profile(c, f2);
  EXPECT_LT(std::abs(p.junction_current) / p.max_current(), 1e-3);
}

TEST(Circuit, ModeProfileRefusesOffResonance) {
  const JerCircuit c = make_circuit(90.0, 6e9, 0.0, 1e-15);
  EXPECT_THROW(mode_profile(c, 7.0e9), std::invalid_argument);
}

TEST(Circuit, DummyHasNoLumpedParticipation) {
  const JerCircuit c = make_circuit(90.0, 6e9, 0.0);
  const ParticipationRatios pr = participation_ratios(mode_profile(c, find_harmonics(c).f_1h), c);
  EXPECT_EQ(pr.inductive, 0.0);
  EXPECT_EQ(pr.shunt_electric, 0.0);
  EXPECT_NEAR(pr.line, 1.0, 1e-9);
}

TEST(Circuit, SecondHarmonicInductiveParticipationVanishes) {
  const JerCircuit c = make_circuit(90.0, 6e9, 0.2e-9);
  const ParticipationRatios pr = participation_ratios(mode_profile(c, find_harmonics(c).f_2h), c);
  EXPECT_LT(pr.inductive, 1e-4);
}

TEST(Circuit, FundamentalInductiveParticipationMatchesLumpedEstimate) {
  JerCircuit c = make_circuit(90.0, 6e9, 0.0);
  const double l_line = c.left.inductance_per_length() * c.total_length();
  const double l_tj = 0.1 * effective_lumped_inductance(c);
  c.junction.l_total = l_tj;
  c.junction.count = 2;
  c.junction.area_each_um2 = 1.0;
  const ParticipationRatios pr = participation_ratios(mode_profile(c, find_harmonics(c).f_1h), c);
  const double lumped = l_tj / (l_line + 2.0 * l_tj);
  EXPECT_NEAR(pr.inductive, lumped, 0.2 * lumped);
  EXPECT_NEAR(pr.inductive + pr.line + pr.shunt_electric + pr.coupler, 1.0, 1e-9);
}

TEST(Circuit, LosslessCircuitHasZeroInternalLoss) {
  const JerCircuit c = make_circuit(90.0, 6e9, 0.1e-9, 1e-15);
  const ModeLoss loss = predict_mode_loss(c, find_harmonics(c).f_1h);
  EXPECT_EQ(loss.gamma, 0.0);
  EXPECT_GT(loss.gamma_coupling, 0.0);
}

TEST(Circuit, LossChannelsAreLinearAndSeparated) {
  JerCircuit c = make_circuit(90.0, 6e9, 0.1e-9, 1e-15);
  const HarmonicPair h = find_harmonics(c);
  c.junction.r_series = 0.01;
  const ModeLoss a = predict_mode_loss(c, h.f_1h);
  c.junction.r_series = 0.02;
  const ModeLoss b = predict_mode_loss(c, h.f_1h);
  EXPECT_GT(a.gamma_series, 0.0);
  EXPECT_LT(rel(b.gamma_series, 2.0 * a.gamma_series), 1e-4);
  EXPECT_EQ(a.gamma_line, 0.0);
  EXPECT_EQ(a.gamma_shunt, 0.0);

  // the series channel is blind at the current node, the shunt channel is not
  c.junction.g_shunt = 1e-6;
  const ModeLoss even = predict_mode_loss(c, h.f_2h);
  EXPECT_LT(even.gamma_series, 1e-4 * b.gamma_series);
  EXPECT_GT(even.gamma_shunt, 0.0);
  EXPECT_NEAR(even.gamma, even.gamma_series + even.gamma_shunt + even.gamma_line, 1e-20);
}

TEST(Circuit, PerturbativeLossAgreesWithNotchFit) {
  JerCircuit c = make_circuit(90.0, 6e9, 0.1e-9, 1e-15);
  c.left.alpha = c.right.alpha = 5e-6;
  c.junction.r_series = 2e-4;
  const double f1 = find_harmonics(c).f_1h;
  const ModeLoss loss = predict_mode_loss(c, f1);
  const double lw = estimate_linewidth(c, f1);
  EXPECT_LT(rel(lw / f1, loss.gamma + loss.gamma_coupling), 1e-4);

  PowerSweepTrace t;
  t.applied_power = 1e-17;
  for (int i = 0; i < 1001; ++i) {
    const double f = f1 + 10.0 * lw * (2.0 * i / 1000.0 - 1.0);
    t.freqs.push_back(f);
    t.s21.push_back(s21(c, f));
  }
  const ResonanceFit fit = fit_notch(t);
  EXPECT_LT(rel(fit.gamma, loss.gamma), 1e-4);
  EXPECT_LT(rel(1.0 / fit.q_c_real(), loss.gamma_coupling), 1e-4);
  EXPECT_LT(rel(fit.f_r, f1), 1e-8);
}

TEST(Circuit, DesignCheckBoundary) {
  JerCircuit c = make_circuit(90.0, 6e9, 0.0, 1e-15);
  const DesignReport dummy = design_check(c);
  EXPECT_EQ(dummy.inductance_ratio, 0.0);
  EXPECT_EQ(dummy.voltage_drop_ratio, 0.0);
  EXPECT_TRUE(dummy.passed);

  const double l_eff = effective_lumped_inductance(c);
  c.junction.count = 2;
  c.junction.area_each_um2 = 1.0;
  c.junction.l_total = 0.15 * l_eff;
  const DesignReport edge = design_check(c);
  EXPECT_NEAR(edge.inductance_ratio, 0.15, 1e-12);
  EXPECT_TRUE(edge.passed);
  EXPECT_GT(edge.voltage_drop_ratio, 0.0);
  EXPECT_LT(edge.node_voltage_ratio, 0.05);

  c.junction.l_total = 0.2 * l_eff;
  const DesignReport over = design_check(c);
  EXPECT_NEAR(over.inductance_ratio, 0.20, 1e-12);
  EXPECT_FALSE(over.passed);
}

TEST(Circuit, JunctionInductanceFromArea) {
  // Phi0 / (2 pi Ic), Ic = 10 uA
  const double l = JunctionArray::inductance_from_area(1, 10.0, 1.0);
  EXPECT_NEAR(l, constants::flux_quantum / (constants::two_pi * 10e-6), 1e-20);
  EXPECT_NEAR(JunctionArray::inductance_from_area(2, 10.0, 1.0), 2.0 * l, 1e-20);
}

TEST(Circuit, AmbiguousBandIsReported) {
  const JerCircuit c = make_circuit(90.0, 6e9, 0.0);
  EXPECT_THROW(find_harmonics(c, 1e9, 20e9), DataError);
}

}  // namespace
}  // namespace jer
