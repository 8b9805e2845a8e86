#include "jer/error.hpp"
#include "jer/resonance_fit.hpp"
#include "jer/synth.hpp"
#include "jer/tls_fit.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

namespace jer {
namespace {

using test::rel;

const Scenario& default_scenario_built() {
  static const Scenario s = build_scenario(ScenarioConfig::default_scenario());
  return s;
}

TEST(Synth, InjectedJunctionLossScalesWithArea) {
  const Scenario& s = default_scenario_built();
  EXPECT_LT(rel(s.device("A-L").loss[0].gamma_junction, 1.61e-8 * 40.0), 1e-6);
  EXPECT_LT(rel(s.device("A-M").loss[0].gamma_junction, 3.22e-7), 1e-6);
  EXPECT_LT(rel(s.device("A-S").loss[0].gamma_junction, 1.61e-8 * 10.0), 1e-6);
  EXPECT_LT(rel(s.device("A-L").loss[0].gamma_junction, 2.0 * s.device("A-M").loss[0].gamma_junction), 1e-6);
}

TEST(Synth, ExternalRateIndependentOfArea) {
  const Scenario& s = default_scenario_built();
  for (const char* id : {"A-L", "A-M", "A-S", "B-2", "B-4"}) {
    EXPECT_LT(rel(s.device(id).loss[1].gamma_junction, 1.61e-6), 1e-6) << id;
  }
}

TEST(Synth, DummyAndControlsCarryNoJunctionLoss) {
  const Scenario& s = default_scenario_built();
  for (const char* id : {"A-D", "B-D", "A-C1"}) {
    EXPECT_EQ(s.device(id).loss[0].gamma_junction, 0.0) << id;
    EXPECT_EQ(s.device(id).loss[1].gamma_junction, 0.0) << id;
    EXPECT_LT(rel(s.device(id).loss[0].gamma_line, 2e-7), 1e-6) << id;
  }
}

TEST(Synth, FundamentalsInMeasuredBand) {
  for (const auto& d : default_scenario_built().devices) {
    EXPECT_GT(d.harmonics.f_1h, 5.6e9) << d.spec.device_id;
    EXPECT_LT(d.harmonics.f_1h, 6.1e9) << d.spec.device_id;
    EXPECT_TRUE(d.design.passed) << d.spec.device_id;
  }
}

TEST(Synth, SameSeedSameTrace) {
  const Scenario& s = default_scenario_built();
  const SynthTrace a = generate_trace(s, s.device("A-M"), 1, 3, 42);
  const SynthTrace b = generate_trace(s, s.device("A-M"), 1, 3, 42);
  const SynthTrace c = generate_trace(s, s.device("A-M"), 1, 3, 43);
  EXPECT_EQ(a.trace.s21, b.trace.s21);
  EXPECT_NE(a.trace.s21, c.trace.s21);
  EXPECT_EQ(a.trace.freqs.size(), 1001u);
}

TEST(Synth, NoiselessTraceRoundTrip) {
  const Scenario& s = default_scenario_built();
  for (int h : {1, 2}) {
    const SynthTrace t = generate_noiseless_trace(s, s.device("B-4"), h, 5);
    const ResonanceFit fit = fit_notch(t.trace);
    EXPECT_LT(rel(fit.f_r, t.truth.f_r), 1e-7) << h;
    EXPECT_LT(rel(fit.q_l, t.truth.q_l), 1e-3) << h;
    EXPECT_LT(rel(fit.q_c_real(), t.truth.q_c), 1e-3) << h;
    EXPECT_LT(rel(fit.gamma, t.truth.gamma_internal), 1e-3) << h;
    EXPECT_LT(rel(photon_number(fit, t.trace.applied_power), t.truth.photon_number), 1e-3) << h;
  }
}

TEST(Synth, HighPowerSaturatesTheTlsChannel) {
  const Scenario& s = default_scenario_built();
  const SynthDevice& d = s.device("A-M");
  const int top = static_cast<int>(s.config.powers_dbm.size()) - 1;
  const SynthTrace lo = generate_noiseless_trace(s, d, 1, 0);
  const SynthTrace hi = generate_noiseless_trace(s, d, 1, top);
  EXPECT_GT(hi.truth.photon_number, 100.0 * s.config.tls_n_c);
  EXPECT_LT(hi.truth.tls_scale, 0.1);
  EXPECT_GT(lo.truth.tls_scale, 0.95);
  EXPECT_LT(rel(hi.truth.gamma_internal, hi.truth.tls_scale * d.loss[0].gamma_internal()), 1e-3);
}

TEST(Synth, UntouchedLineStaysAtFullLossWhenNotSaturable) {
  ScenarioConfig cfg = ScenarioConfig::default_scenario();
  for (auto& d : cfg.devices) d.line_tls = false;
  cfg.devices.resize(1);
  const Scenario s = build_scenario(cfg);
  const SynthDevice& d = s.devices.front();
  const int top = static_cast<int>(cfg.powers_dbm.size()) - 1;
  const SynthTrace hi = generate_noiseless_trace(s, d, 1, top);
  EXPECT_LT(rel(fit_notch(hi.trace).gamma, d.loss[0].gamma_line), 1e-3);
  EXPECT_LT(rel(injected_gamma_lp(s, d, 1), 2e-7), 1e-9);
}

TEST(Synth, PowerSweepRecoversInjectedGammaLp) {
  const Scenario& s = default_scenario_built();
  const SynthDevice& d = s.device("A-L");
  PowerDependence dep;
  dep.f = d.harmonics.f_1h;
  dep.temperature = s.config.temperature;
  for (int k : usable_powers(s, d, 1)) {
    const SynthTrace t = generate_trace(s, d, 1, k, 7);
    const ResonanceFit fit = fit_notch(t.trace);
    dep.points.push_back({photon_number(fit, t.trace.applied_power), fit.gamma, fit.gamma_sigma});
  }
  const TlsFitResult r = fit_power_dependence(dep);
  EXPECT_LT(rel(gamma_lp(r).value, injected_gamma_lp(s, d, 1)), 0.10);
}

TEST(Synth, OversizedJunctionIsRejected) {
  ScenarioConfig cfg = ScenarioConfig::default_scenario();
  cfg.devices.back().area_each_um2 = 1.0;  // 6 small junctions: ratio far above 15%
  EXPECT_THROW(build_scenario(cfg), ConfigError);
}

TEST(Synth, UnsimulatedDeviceHasNoTraces) {
  const Scenario& s = default_scenario_built();
  EXPECT_THROW(generate_noiseless_trace(s, s.device("B-6"), 1, 0), DataError);
}

}  // namespace
}  // namespace jer
