#include "jer/error.hpp"
#include "jer/numerics.hpp"
#include "jer/resonance_fit.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

namespace jer {
namespace {

using test::rel;

PowerSweepTrace make_trace(const NotchParameters& p, int n = 1001, double span_linewidths = 10.0) {
  PowerSweepTrace t;
  const double lw = p.f_r / p.q_l;
  for (int i = 0; i < n; ++i) {
    const double f = p.f_r + lw * span_linewidths * (2.0 * i / (n - 1) - 1.0);
    t.freqs.push_back(f);
    t.s21.push_back(notch_model(p, f));
  }
  t.applied_power = 1e-17;
  t.device_id = "t";
  return t;
}

void add_noise(PowerSweepTrace& t, double sigma, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, sigma);
  for (auto& s : t.s21) s += cplx(n(rng), n(rng));
}

NotchParameters base() {
  NotchParameters p;
  p.f_r = 6e9;
  p.q_l = 5e4;
  p.q_c_mag = 1e5;
  p.phi = 0.0;
  return p;
}

double q_i_of(const NotchParameters& p) {
  return 1.0 / (1.0 / p.q_l - std::cos(p.phi) / p.q_c_mag);
}

TEST(NotchModel, SymmetricDepth) {
  const NotchParameters p = base();
  EXPECT_NEAR(std::abs(notch_model(p, p.f_r)), 0.5, 1e-15);
  EXPECT_NEAR(std::abs(notch_model(p, 1.1 * p.f_r)), 1.0, 1e-3);
}

TEST(NotchFit, NoiselessRecovery) {
  const NotchParameters p = base();
  const ResonanceFit fit = fit_notch(make_trace(p));
  EXPECT_LT(rel(fit.f_r, p.f_r), 1e-6);
  EXPECT_LT(rel(fit.q_l, p.q_l), 1e-6);
  EXPECT_LT(rel(fit.q_c_mag, p.q_c_mag), 1e-6);
  EXPECT_NEAR(fit.phi, 0.0, 1e-6);
  EXPECT_LT(rel(fit.q_i, 1e5), 1e-6);
  EXPECT_FALSE(fit.flagged);
}

TEST(NotchFit, NoiselessRecoveryWithEnvironment) {
  NotchParameters p = base();
  p.phi = -0.2;
  p.background = {0.37, 2.1, 41e-9};
  const ResonanceFit fit = fit_notch(make_trace(p));
  EXPECT_LT(rel(fit.f_r, p.f_r), 1e-6);
  EXPECT_LT(rel(fit.q_l, p.q_l), 1e-6);
  EXPECT_LT(rel(fit.q_c_mag, p.q_c_mag), 1e-6);
  EXPECT_NEAR(fit.phi, p.phi, 1e-6);
  EXPECT_LT(rel(fit.background.amplitude, 0.37), 1e-6);
  EXPECT_LT(rel(fit.background.delay, 41e-9), 1e-4);
}

TEST(NotchFit, DiameterCorrectionRemovesAsymmetryBias) {
  NotchParameters p = base();
  p.phi = 0.3;
  const double truth = q_i_of(p);
  std::vector<double> corrected, naive;
  for (int s = 0; s < 30; ++s) {
    PowerSweepTrace t = make_trace(p);
    add_noise(t, 0.01, 100 + s);
    const ResonanceFit fit = fit_notch(t);
    corrected.push_back(rel(fit.q_i, truth));
    // depth-only estimator: 1/Q_i = (1 - (1 - min|S21|)) / Q_l ignoring phi
    const double depth = 1.0 - std::abs(notch_model(p, p.f_r));
    naive.push_back(rel(1.0 / ((1.0 - depth) / fit.q_l), truth));
  }
  EXPECT_LT(numerics::median(corrected), 0.01);
  EXPECT_GT(numerics::median(naive), 0.01);
}

TEST(NotchFit, NoisyMedianWithinOnePercent) {
  const NotchParameters p = base();
  std::vector<double> err;
  for (int s = 0; s < 100; ++s) {
    PowerSweepTrace t = make_trace(p);
    add_noise(t, 0.01, s);
    err.push_back(rel(fit_notch(t).q_i, 1e5));
  }
  EXPECT_LT(numerics::median(err), 0.01);
}

TEST(NotchFit, InvariantUnderBackgroundRotationAndScale) {
  NotchParameters p = base();
  p.phi = 0.1;
  const ResonanceFit a = fit_notch(make_trace(p));
  p.background.amplitude = 3.5;
  p.background.phase = -1.3;
  const ResonanceFit b = fit_notch(make_trace(p));
  EXPECT_LT(rel(a.q_i, b.q_i), 1e-7);
  EXPECT_LT(rel(a.f_r, b.f_r), 1e-12);
}

TEST(NotchFit, StableUnderDownsampling) {
  const NotchParameters p = base();
  const ResonanceFit a = fit_notch(make_trace(p, 1001));
  const ResonanceFit b = fit_notch(make_trace(p, 201));
  EXPECT_LT(rel(a.q_i, b.q_i), 1e-6);
}

TEST(NotchFit, NoDipIsDataError) {
  PowerSweepTrace t;
  for (int i = 0; i < 200; ++i) {
    t.freqs.push_back(6e9 + i * 1e3);
    t.s21.push_back(cplx(0.8, 0.1));
  }
  EXPECT_THROW(fit_notch(t), DataError);
}

TEST(NotchFit, TraceValidation) {
  PowerSweepTrace t = make_trace(base(), 50);
  std::swap(t.freqs[3], t.freqs[4]);
  EXPECT_THROW(t.validate(), DataError);
  PowerSweepTrace u = make_trace(base(), 50);
  u.s21.pop_back();
  EXPECT_THROW(u.validate(), DataError);
}

TEST(CircleFit, ExactCircle) {
  std::vector<cplx> pts;
  for (int i = 0; i < 40; ++i) pts.push_back(cplx(0.3, -0.7) + 0.25 * std::polar(1.0, 0.1 * i));
  const Circle c = fit_circle(pts);
  EXPECT_NEAR(c.centre.real(), 0.3, 1e-12);
  EXPECT_NEAR(c.centre.imag(), -0.7, 1e-12);
  EXPECT_NEAR(c.radius, 0.25, 1e-12);
}

TEST(PhotonNumber, WorkedValue) {
  // 2 Q_l^2 P / (Q_c hbar w^2), cross-checked in SI by hand
  const double w = constants::two_pi * 6e9;
  const double expected = 2.0 * 1e10 * 1e-17 / (2e5 * constants::hbar * w * w);
  const double n = photon_number(6e9, 1e5, 2e5, 1e-17);
  EXPECT_NEAR(n, expected, 1e-12 * expected);
  EXPECT_NEAR(n, 6.67, 0.01);
}

TEST(PhotonNumber, LinearInPower) {
  const double a = photon_number(5.9e9, 3e4, 7e4, 2.5e-16);
  EXPECT_EQ(photon_number(5.9e9, 3e4, 7e4, 5e-16), 2.0 * a);
}

TEST(PhotonNumber, RejectsLoadedAboveCoupling) {
  EXPECT_NO_THROW(photon_number(6e9, 1e5, 1e5, 1e-17));
  EXPECT_THROW(photon_number(6e9, 1.001e5, 1e5, 1e-17), DataError);
}

TEST(PhotonNumber, DbmConversion) {
  EXPECT_NEAR(dbm_to_watts(-30.0), 1e-6, 1e-21);
  EXPECT_NEAR(watts_to_dbm(1e-3), 0.0, 1e-12);
  EXPECT_NEAR(watts_to_dbm(dbm_to_watts(-137.5)), -137.5, 1e-12);
}

}  // namespace
}  // namespace jer
