#pragma once

#include <cmath>

#include "linopen/errors.hpp"

namespace linopen {

/// First-order forward-mode dual number: value plus one directional derivative.
struct Dual {
  double v = 0.0;
  double d = 0.0;

  Dual() = default;
  Dual(double value) : v(value) {}  // NOLINT(google-explicit-constructor)
  Dual(double value, double deriv) : v(value), d(deriv) {}
};

inline double primal(const Dual& a) { return a.v; }

inline Dual operator-(const Dual& a) { return {-a.v, -a.d}; }
inline Dual operator+(const Dual& a, const Dual& b) { return {a.v + b.v, a.d + b.d}; }
inline Dual operator-(const Dual& a, const Dual& b) { return {a.v - b.v, a.d - b.d}; }
inline Dual operator*(const Dual& a, const Dual& b) { return {a.v * b.v, a.d * b.v + a.v * b.d}; }
inline Dual operator/(const Dual& a, const Dual& b) {
  return {a.v / b.v, (a.d * b.v - a.v * b.d) / (b.v * b.v)};
}

inline Dual sin(const Dual& a) { return {std::sin(a.v), std::cos(a.v) * a.d}; }
inline Dual cos(const Dual& a) { return {std::cos(a.v), -std::sin(a.v) * a.d}; }
inline Dual exp(const Dual& a) {
  double e = std::exp(a.v);
  return {e, e * a.d};
}
inline Dual tanh(const Dual& a) {
  double t = std::tanh(a.v);
  return {t, (1.0 - t * t) * a.d};
}

inline bool isfinite(const Dual& a) { return std::isfinite(a.v) && std::isfinite(a.d); }

/// base^p for a constant exponent. A seed that does not move the base
/// contributes nothing, so 0^0.5 is only an error when differentiated.
inline Dual pow_scalar(const Dual& base, double p) {
  double value = std::pow(base.v, p);
  if (base.d == 0.0 || p == 0.0) return {value, 0.0};
  double slope = p * std::pow(base.v, p - 1.0);
  if (!std::isfinite(slope)) throw EvalError("non-differentiable point in pow");
  return {value, slope * base.d};
}

}  // namespace linopen
