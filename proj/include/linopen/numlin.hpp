#pragma once

#include <algorithm>
#include <complex>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "linopen/errors.hpp"

namespace linopen {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using ComplexValue = std::complex<double>;

/// Desk-scale cap on state dimension.
inline constexpr int kMaxDimension = 50;

/// Default rank threshold is this factor times sigma_max times max(rows, cols).
inline constexpr double kDefaultRankRelative = 1e-9;

inline void require_finite(const Matrix& M, const char* what) {
  if (M.size() == 0) throw NumericError(std::string(what) + ": empty matrix");
  if (!M.allFinite()) throw NumericError(std::string(what) + ": non-finite entry");
}

/// Eigenvalues with multiplicity, ordered lexicographically by (Re, Im).
inline std::vector<ComplexValue> spectrum(const Matrix& A) {
  require_finite(A, "spectrum");
  if (A.rows() != A.cols()) throw NumericError("spectrum: matrix is not square");
  if (A.rows() > kMaxDimension) {
    throw NumericError("spectrum: dimension " + std::to_string(A.rows()) + " exceeds cap of " +
                       std::to_string(kMaxDimension));
  }
  Eigen::EigenSolver<Matrix> solver(A, /*computeEigenvectors=*/false);
  if (solver.info() != Eigen::Success) {
    throw NumericError("spectrum: QR iteration did not converge");
  }
  std::vector<ComplexValue> out(solver.eigenvalues().begin(), solver.eigenvalues().end());
  std::sort(out.begin(), out.end(), [](const ComplexValue& a, const ComplexValue& b) {
    if (a.real() != b.real()) return a.real() < b.real();
    return a.imag() < b.imag();
  });
  return out;
}

/// Singular values in descending order.
inline std::vector<double> singular_values(const Matrix& M) {
  require_finite(M, "singular_values");
  Eigen::JacobiSVD<Matrix> svd(M);
  const auto& s = svd.singularValues();
  std::vector<double> out(s.data(), s.data() + s.size());
  std::sort(out.begin(), out.end(), std::greater<>());
  return out;
}

inline double rank_tolerance(const Matrix& M, double relative = kDefaultRankRelative) {
  auto s = singular_values(M);
  double smax = s.empty() ? 0.0 : s.front();
  return relative * smax * static_cast<double>(std::max(M.rows(), M.cols()));
}

/// Number of singular values strictly above `tol`.
inline int numerical_rank(const Matrix& M, double tol) {
  auto s = singular_values(M);
  return static_cast<int>(std::count_if(s.begin(), s.end(), [tol](double v) { return v > tol; }));
}

inline int numerical_rank(const Matrix& M) { return numerical_rank(M, rank_tolerance(M)); }

inline Matrix hstack(const Matrix& left, const Matrix& right) {
  Matrix out(left.rows(), left.cols() + right.cols());
  out << left, right;
  return out;
}

/// Rank over C of [A - lambda I | B] via the real embedding [[Re, -Im], [Im, Re]],
/// whose real rank is exactly twice the complex rank.
inline int complex_pencil_rank(const Matrix& A, ComplexValue lambda, const Matrix& B,
                               std::optional<double> tol = std::nullopt,
                               double relative = kDefaultRankRelative) {
  const Eigen::Index n = A.rows();
  const Eigen::Index m = B.cols();
  if (A.cols() != n || B.rows() != n) throw NumericError("complex_pencil_rank: dimension mismatch");
  Matrix re(n, n + m);
  Matrix im = Matrix::Zero(n, n + m);
  re << A - lambda.real() * Matrix::Identity(n, n), B;
  im.leftCols(n) = -lambda.imag() * Matrix::Identity(n, n);
  Matrix embedded(2 * n, 2 * (n + m));
  embedded << re, -im, im, re;
  double threshold = tol.value_or(relative * singular_values(embedded).front() *
                                  static_cast<double>(std::max(n, n + m)));
  return numerical_rank(embedded, threshold) / 2;
}

/// Smallest achievable max |a_i - b_pi(i)| over pairings pi. Exhaustive for up
/// to 8 values, greedy nearest-neighbour beyond that.
inline double max_matched_distance(std::vector<ComplexValue> a, const std::vector<ComplexValue>& b) {
  if (a.size() != b.size()) throw NumericError("max_matched_distance: size mismatch");
  const std::size_t n = a.size();
  if (n == 0) return 0.0;
  if (n <= 8) {
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    double best = std::numeric_limits<double>::infinity();
    do {
      double worst = 0.0;
      for (std::size_t i = 0; i < n && worst < best; ++i) {
        worst = std::max(worst, std::abs(a[i] - b[perm[i]]));
      }
      best = std::min(best, worst);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
  }
  std::vector<bool> used(n, false);
  double worst = 0.0;
  for (const auto& target : b) {
    std::size_t pick = 0;
    double d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      if (!used[i] && std::abs(a[i] - target) < d) {
        d = std::abs(a[i] - target);
        pick = i;
      }
    }
    used[pick] = true;
    worst = std::max(worst, d);
  }
  return worst;
}

}  // namespace linopen
