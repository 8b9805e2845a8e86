#pragma once

#include <numbers>

namespace jer::constants {

// CODATA 2018 exact / recommended values.
inline constexpr double planck = 6.62607015e-34;            // J s
inline constexpr double hbar = planck / (2.0 * std::numbers::pi);
inline constexpr double boltzmann = 1.380649e-23;           // J/K
inline constexpr double flux_quantum = 2.067833848e-15;     // Wb

inline constexpr double pi = std::numbers::pi;
inline constexpr double two_pi = 2.0 * std::numbers::pi;

}  // namespace jer::constants
