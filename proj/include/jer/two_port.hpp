#pragma once

#include <complex>
#include <span>
#include <variant>

namespace jer {

using cplx = std::complex<double>;

/// ABCD (transmission) matrix of a linear two-port.
///   [V1]   [A B] [V2]
///   [I1] = [C D] [I2]
/// with I1 flowing into port 1 and I2 flowing out of port 2.
class TwoPort {
 public:
  TwoPort() = default;
  TwoPort(cplx a, cplx b, cplx c, cplx d) : a_(a), b_(b), c_(c), d_(d) {}

  cplx a() const { return a_; }
  cplx b() const { return b_; }
  cplx c() const { return c_; }
  cplx d() const { return d_; }

  cplx determinant() const { return a_ * d_ - b_ * c_; }

  TwoPort operator*(const TwoPort& rhs) const {
    return {a_ * rhs.a_ + b_ * rhs.c_, a_ * rhs.b_ + b_ * rhs.d_,
            c_ * rhs.a_ + d_ * rhs.c_, c_ * rhs.b_ + d_ * rhs.d_};
  }
  TwoPort& operator*=(const TwoPort& rhs) { return *this = *this * rhs; }

  /// Port-1 state given the port-2 state.
  std::pair<cplx, cplx> apply(cplx v2, cplx i2) const {
    return {a_ * v2 + b_ * i2, c_ * v2 + d_ * i2};
  }

 private:
  cplx a_{1.0}, b_{0.0}, c_{0.0}, d_{1.0};
};

/// Uniform TEM line segment, gamma = alpha + j*2*pi*f/v_ph.
struct LineElement {
  double z0;
  double v_ph;
  double length;
  double alpha = 0.0;
};

/// Series impedance [[1, Z], [0, 1]].
struct SeriesElement {
  cplx z;
};

/// Shunt admittance [[1, 0], [Y, 1]].
struct ShuntElement {
  cplx y;
};

using NetworkElement = std::variant<LineElement, SeriesElement, ShuntElement>;

TwoPort element_abcd(const NetworkElement& element, double freq_hz);

/// Ordered product of the element matrices; identity for an empty list.
/// Throws std::invalid_argument naming the offending index for non-finite input.
TwoPort abcd_cascade(std::span<const NetworkElement> elements, double freq_hz);

}  // namespace jer
