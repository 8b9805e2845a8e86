#pragma once

#include "jer/circuit.hpp"
#include "jer/extraction.hpp"
#include "jer/resonance_fit.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace jer {

struct DeviceSpec {
  std::string device_id;
  std::string sample_id;
  DeviceKind kind = DeviceKind::control;
  int jj_count = 0;
  double area_each_um2 = 0.0;
  double bare_f0_hz = 6e9;      // v_ph / (2 l) of the line without junction
  bool simulate = true;         // false: design-checked only (e.g. a malfunctioning device)
  bool line_tls = true;         // line loss follows the TLS power dependence
  std::optional<double> l_tj;   // overrides the area-derived inductance
};

struct ScenarioConfig {
  double z0 = 90.0;
  double v_ph = 1.2e8;
  double feed_z0 = 50.0;
  double c_couple = 1e-15;
  double l_couple = 20e-9;
  double temperature = 0.015;
  double jc_ua_per_um2 = 1.0;

  double line_gamma = 2e-7;                 // line loss at the 1st harmonic
  double internal_rate_per_area = 1.61e-8;  // per um^2, via r_series at the 1st harmonic
  double external_rate = 1.61e-6;           // via g_shunt at the 2nd harmonic
  double dummy_external_rate = 0.0;         // electrode-only loss of the dummy at the 2nd harmonic
  double tls_n_c = 50.0;
  double tls_alpha = 0.8;

  double noise_sigma = 0.01;  // per real and imaginary component
  std::vector<double> powers_dbm;
  double max_photon_number = 1e6;
  int points_per_trace = 1001;
  double window_linewidths = 10.0;
  std::uint64_t seed = 1;

  std::vector<DeviceSpec> devices;

  /// Two samples of 2 controls + dummy + JERs (A: 2 JJs of 20/10/5 um^2;
  /// B: 10 um^2 JJs, N = 2, 4, 6 with the 6-JJ device not simulated).
  static ScenarioConfig default_scenario();
  void validate() const;
};

/// Loss at one harmonic of a device at full TLS strength.
struct InjectedLoss {
  double frequency = 0.0;
  double gamma_line = 0.0;
  double gamma_junction = 0.0;
  double gamma_coupling = 0.0;
  double gamma_internal() const { return gamma_line + gamma_junction; }
};

struct SynthDevice {
  DeviceSpec spec;
  JerCircuit circuit;
  HarmonicPair harmonics;
  DesignReport design;
  InjectedLoss loss[2];  // [0]: 1st harmonic, [1]: 2nd harmonic
};

struct Scenario {
  ScenarioConfig config;
  std::vector<SynthDevice> devices;

  const SynthDevice& device(const std::string& id) const;
};

/// Lossless circuit of one device (geometry, coupler, junction inductance).
JerCircuit design_circuit(const ScenarioConfig& config, const DeviceSpec& spec);

/// Builds every device, solves alpha, r_series and g_shunt for the injected
/// losses and resolves both harmonics. Throws ConfigError when a JER fails
/// the design check or an injection cannot be met perturbatively.
Scenario build_scenario(const ScenarioConfig& config);

/// Ground truth of one trace.
struct TraceTruth {
  std::string device_id;
  int harmonic = 1;
  int power_index = 0;
  double applied_power_dbm = 0.0;
  double photon_number = 0.0;
  double tls_scale = 0.0;  // tanh(hf/2kT)/sqrt(1 + (n/n_c)^alpha)
  double f_r = 0.0;
  double q_l = 0.0;
  double q_c = 0.0;
  double gamma_internal = 0.0;
};

struct SynthTrace {
  PowerSweepTrace trace;
  TraceTruth truth;
};

/// Noise-free trace at one power: self-consistent photon number, circuit with
/// scaled loss channels, 1001-point window of +-10 linewidths.
SynthTrace generate_noiseless_trace(const Scenario& scenario, const SynthDevice& device, int harmonic,
                                    int power_index);

/// Adds complex Gaussian noise with a stream fixed by (seed, device, harmonic, power index).
void add_noise(PowerSweepTrace& trace, double sigma, std::uint64_t seed, int power_index);

SynthTrace generate_trace(const Scenario& scenario, const SynthDevice& device, int harmonic,
                          int power_index, std::uint64_t seed);

/// Indices of the configured powers whose photon number stays below the cap.
std::vector<int> usable_powers(const Scenario& scenario, const SynthDevice& device, int harmonic);

/// Gamma_LP implied by the injected losses (all channels saturable except a
/// line with line_tls off).
double injected_gamma_lp(const Scenario& scenario, const SynthDevice& device, int harmonic);

}  // namespace jer
