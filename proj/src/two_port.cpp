#include "jer/two_port.hpp"

#include "jer/constants.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace jer {

namespace {

bool finite(cplx z) { return std::isfinite(z.real()) && std::isfinite(z.imag()); }

bool element_finite(const NetworkElement& element) {
  return std::visit(
      [](const auto& e) -> bool {
        using T = std::decay_t<decltype(e)>;
        if constexpr (std::is_same_v<T, LineElement>) {
          return std::isfinite(e.z0) && std::isfinite(e.v_ph) && std::isfinite(e.length) &&
                 std::isfinite(e.alpha) && e.z0 > 0 && e.v_ph > 0;
        } else if constexpr (std::is_same_v<T, SeriesElement>) {
          return finite(e.z);
        } else {
          return finite(e.y);
        }
      },
      element);
}

}  // namespace

TwoPort element_abcd(const NetworkElement& element, double freq_hz) {
  return std::visit(
      [freq_hz](const auto& e) -> TwoPort {
        using T = std::decay_t<decltype(e)>;
        if constexpr (std::is_same_v<T, LineElement>) {
          const cplx gamma_d{e.alpha * e.length, constants::two_pi * freq_hz / e.v_ph * e.length};
          const cplx ch = std::cosh(gamma_d);
          const cplx sh = std::sinh(gamma_d);
          return {ch, e.z0 * sh, sh / e.z0, ch};
        } else if constexpr (std::is_same_v<T, SeriesElement>) {
          return {1.0, e.z, 0.0, 1.0};
        } else {
          return {1.0, 0.0, e.y, 1.0};
        }
      },
      element);
}

TwoPort abcd_cascade(std::span<const NetworkElement> elements, double freq_hz) {
  if (!std::isfinite(freq_hz)) throw std::invalid_argument("abcd_cascade: non-finite frequency");
  TwoPort total;
  for (std::size_t i = 0; i < elements.size(); ++i) {
    if (!element_finite(elements[i])) {
      throw std::invalid_argument("abcd_cascade: element " + std::to_string(i) +
                                  " has a non-finite or invalid parameter");
    }
    total *= element_abcd(elements[i], freq_hz);
  }
  return total;
}

}  // namespace jer
