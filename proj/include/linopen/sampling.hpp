#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>

#include "linopen/numlin.hpp"

namespace linopen::sampling {

/// Radical inverse of `index` in the given prime base.
inline double radical_inverse(std::size_t index, unsigned base) {
  double inv = 1.0 / base;
  double f = inv;
  double out = 0.0;
  while (index > 0) {
    out += f * static_cast<double>(index % base);
    index /= base;
    f *= inv;
  }
  return out;
}

inline constexpr std::array<unsigned, 32> kPrimes{2,  3,  5,  7,  11, 13, 17,  19,  23,  29,  31,
                                                 37, 41, 43, 47, 53, 59, 61,  67,  71,  73,  79,
                                                 83, 89, 97, 101, 103, 107, 109, 113, 127, 131};

/// Point `k` of the Halton sequence in [0,1)^dim; dimensions past the prime
/// table fall back to a Weyl sequence.
inline double halton(std::size_t k, std::size_t dim_index) {
  if (dim_index < kPrimes.size()) return radical_inverse(k, kPrimes[dim_index]);
  double alpha = std::sqrt(static_cast<double>(kPrimes.back() + 2 * dim_index + 1));
  double v = static_cast<double>(k) * alpha;
  return v - std::floor(v);
}

/// Deterministic point on the unit sphere in R^dim: Box-Muller applied to a
/// Halton point, then normalized. Index 0 is skipped so logs stay finite.
inline Vector sphere_point(std::size_t k, Eigen::Index dim) {
  Vector g(dim);
  for (Eigen::Index i = 0; i < dim; i += 2) {
    double u1 = halton(k + 1, static_cast<std::size_t>(i));
    double u2 = halton(k + 1, static_cast<std::size_t>(i + 1));
    if (u1 <= 0.0) u1 = 0.5;
    double r = std::sqrt(-2.0 * std::log(u1));
    g(i) = r * std::cos(2.0 * std::numbers::pi * u2);
    if (i + 1 < dim) g(i + 1) = r * std::sin(2.0 * std::numbers::pi * u2);
  }
  double norm = g.norm();
  if (norm == 0.0) {
    g.setZero();
    g(0) = 1.0;
    return g;
  }
  return g / norm;
}

/// Deterministic point in the closed unit ball.
inline Vector ball_point(std::size_t k, Eigen::Index dim) {
  double radius = std::pow(halton(k + 1, static_cast<std::size_t>(dim)), 1.0 / static_cast<double>(dim));
  return radius * sphere_point(k, dim);
}

}  // namespace linopen::sampling
