#pragma once

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "linopen/numlin.hpp"
#include "linopen/openness.hpp"
#include "linopen/system.hpp"

namespace linopen {

/// Eigenvalues this close to the stability boundary are classified unstable.
inline constexpr double kDefaultClassTolerance = 1e-8;

/// Spectral classification of A for one time mode.
///
/// Continuous mode: the unstable set holds eigenvalues with Re >= -tol.
/// Discrete mode: it holds eigenvalues with |lambda| >= 1 - tol.
/// `eta` is the sup over the real members of the unstable set (minus infinity
/// when there are none); `eta_modulus` is the same sup taken over |lambda|;
/// `eta_tilde` is max |lambda| over the whole spectrum.
struct SpectralProfile {
  Mode mode = Mode::continuous;
  std::vector<ComplexValue> eigenvalues;
  std::vector<ComplexValue> unstable_set;
  bool unstable_real_only = true;
  bool spectrum_real = true;
  ExtendedReal eta = ExtendedReal::minus_infinity();
  ExtendedReal eta_modulus = ExtendedReal::minus_infinity();
  double eta_tilde = 0.0;
  std::vector<std::string> boundary_warnings;
  friend bool operator==(const SpectralProfile&, const SpectralProfile&) = default;
};

inline std::string format_complex(ComplexValue z, int precision = 12) {
  std::ostringstream os;
  os.precision(precision);
  os << z.real();
  if (z.imag() != 0.0) os << (z.imag() < 0 ? " - " : " + ") << std::abs(z.imag()) << "i";
  return os.str();
}

inline SpectralProfile spectral_profile(const Matrix& A, Mode mode,
                                        double tol_class = kDefaultClassTolerance) {
  SpectralProfile p;
  p.mode = mode;
  p.eigenvalues = spectrum(A);
  double sup_real = -std::numeric_limits<double>::infinity();
  double sup_abs = -std::numeric_limits<double>::infinity();
  for (const auto& lambda : p.eigenvalues) {
    const bool real = std::abs(lambda.imag()) <= tol_class;
    p.spectrum_real = p.spectrum_real && real;
    p.eta_tilde = std::max(p.eta_tilde, std::abs(lambda));
    const double boundary_distance =
        mode == Mode::continuous ? lambda.real() : std::abs(lambda) - 1.0;
    if (boundary_distance < -tol_class) continue;
    p.unstable_set.push_back(lambda);
    if (std::abs(boundary_distance) < tol_class) {
      p.boundary_warnings.push_back("eigenvalue " + format_complex(lambda) +
                                    " lies within tolerance of the stability boundary");
    }
    if (real) {
      sup_real = std::max(sup_real, lambda.real());
      sup_abs = std::max(sup_abs, std::abs(lambda.real()));
    } else {
      p.unstable_real_only = false;
    }
  }
  if (std::isfinite(sup_real)) {
    p.eta = ExtendedReal::of(sup_real);
    p.eta_modulus = ExtendedReal::of(sup_abs);
  }
  return p;
}

/// Rank of the Kalman matrix [B, AB, ..., A^{n-1} B].
inline int kalman_controllability_rank(const Matrix& A, const Matrix& B,
                                       double rank_relative = kDefaultRankRelative) {
  const Eigen::Index n = A.rows();
  if (A.cols() != n || B.rows() != n) throw NumericError("kalman rank: dimension mismatch");
  Matrix K(n, n * B.cols());
  K.leftCols(B.cols()) = B;
  for (Eigen::Index i = 1; i < n; ++i) {
    K.middleCols(i * B.cols(), B.cols()) = A * K.middleCols((i - 1) * B.cols(), B.cols());
  }
  if (K.isZero(0.0)) return 0;
  return numerical_rank(K, rank_tolerance(K, rank_relative));
}

struct HautusResult {
  bool holds = true;
  std::vector<ComplexValue> failures;
};

/// rank [A - lambda I | B] = n for every lambda in the profile's unstable set.
/// The rank can only drop at eigenvalues of A, so this decides the test over
/// the whole closed unstable region.
inline HautusResult hautus_asymptotic(const Matrix& A, const Matrix& B,
                                      const SpectralProfile& profile,
                                      double rank_relative = kDefaultRankRelative) {
  HautusResult r;
  for (const auto& lambda : profile.unstable_set) {
    if (complex_pencil_rank(A, lambda, B, std::nullopt, rank_relative) < A.rows()) {
      r.holds = false;
      r.failures.push_back(lambda);
    }
  }
  return r;
}

/// rank [A - lambda I | B] = n at every eigenvalue of A (controllability).
inline bool hautus_full_spectrum(const Matrix& A, const Matrix& B,
                                 double rank_relative = kDefaultRankRelative) {
  for (const auto& lambda : spectrum(A)) {
    if (complex_pencil_rank(A, lambda, B, std::nullopt, rank_relative) < A.rows()) return false;
  }
  return true;
}

}  // namespace linopen
