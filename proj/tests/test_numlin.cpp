#include <cmath>
#include <complex>
#include <random>

#include <gtest/gtest.h>

#include "linopen/numlin.hpp"
#include "random_systems.hpp"

namespace linopen {
namespace {

using testing_support::random_matrix;
using testing_support::random_orthogonal;

// Determinant by cofactor expansion over complex entries; independent of Eigen.
std::complex<double> cofactor_det(const std::vector<std::vector<std::complex<double>>>& M) {
  const std::size_t n = M.size();
  if (n == 1) return M[0][0];
  std::complex<double> det = 0.0;
  for (std::size_t c = 0; c < n; ++c) {
    std::vector<std::vector<std::complex<double>>> minor;
    for (std::size_t r = 1; r < n; ++r) {
      std::vector<std::complex<double>> row;
      for (std::size_t k = 0; k < n; ++k) {
        if (k != c) row.push_back(M[r][k]);
      }
      minor.push_back(row);
    }
    det += (c % 2 == 0 ? 1.0 : -1.0) * M[0][c] * cofactor_det(minor);
  }
  return det;
}

std::complex<double> char_poly_at(const Matrix& A, std::complex<double> z) {
  std::vector<std::vector<std::complex<double>>> M(static_cast<std::size_t>(A.rows()));
  for (Eigen::Index i = 0; i < A.rows(); ++i) {
    for (Eigen::Index j = 0; j < A.cols(); ++j) {
      M[static_cast<std::size_t>(i)].push_back(A(i, j) - (i == j ? z : 0.0));
    }
  }
  return cofactor_det(M);
}

// Rank of a complex matrix by Gaussian elimination with partial pivoting.
int complex_elimination_rank(std::vector<std::vector<std::complex<double>>> M, double tol) {
  const std::size_t rows = M.size();
  const std::size_t cols = rows ? M[0].size() : 0;
  int rank = 0;
  std::size_t r = 0;
  for (std::size_t c = 0; c < cols && r < rows; ++c) {
    std::size_t piv = r;
    for (std::size_t i = r; i < rows; ++i) {
      if (std::abs(M[i][c]) > std::abs(M[piv][c])) piv = i;
    }
    if (std::abs(M[piv][c]) <= tol) continue;
    std::swap(M[piv], M[r]);
    for (std::size_t i = r + 1; i < rows; ++i) {
      auto f = M[i][c] / M[r][c];
      for (std::size_t k = c; k < cols; ++k) M[i][k] -= f * M[r][k];
    }
    ++r;
    ++rank;
  }
  return rank;
}

TEST(Spectrum, ThreeStateMatrix) {
  Matrix A(3, 3);
  A << 0, 0, 1, 1, 0, 1, 0.1, 0, 0;
  auto ev = spectrum(A);
  ASSERT_EQ(ev.size(), 3u);
  // lambda^3 - 0.1 lambda = 0.
  EXPECT_NEAR(ev[0].real(), -std::sqrt(0.1), 1e-12);
  EXPECT_NEAR(std::abs(ev[1]), 0.0, 1e-12);
  EXPECT_NEAR(ev[2].real(), std::sqrt(0.1), 1e-12);
}

TEST(Spectrum, NilpotentAndRotation) {
  Matrix N(2, 2);
  N << 0, 1, 0, 0;
  for (auto z : spectrum(N)) EXPECT_LT(std::abs(z), 1e-12);
  Matrix R(2, 2);
  R << 0, -1, 1, 0;
  auto ev = spectrum(R);
  EXPECT_NEAR(ev[0].imag(), -1.0, 1e-12);
  EXPECT_NEAR(ev[1].imag(), 1.0, 1e-12);
}

TEST(Spectrum, RootsOfCharacteristicPolynomial) {
  std::mt19937_64 rng(1);
  for (int k = 0; k < 50; ++k) {
    const Eigen::Index n = 1 + k % 5;
    Matrix A = random_matrix(rng, n, n);
    auto ev = spectrum(A);
    ASSERT_EQ(static_cast<Eigen::Index>(ev.size()), n);
    const double scale = std::pow(1.0 + A.norm(), static_cast<double>(n));
    for (auto z : ev) EXPECT_LT(std::abs(char_poly_at(A, z)), 1e-9 * scale);
    for (std::size_t i = 1; i < ev.size(); ++i) {
      EXPECT_TRUE(ev[i - 1].real() < ev[i].real() ||
                  (ev[i - 1].real() == ev[i].real() && ev[i - 1].imag() <= ev[i].imag()));
    }
  }
}

TEST(Spectrum, RejectsBadInput) {
  EXPECT_THROW(spectrum(Matrix::Zero(2, 3)), NumericError);
  EXPECT_THROW(spectrum(Matrix::Zero(51, 51)), NumericError);
  Matrix bad = Matrix::Identity(2, 2);
  bad(0, 1) = std::nan("");
  EXPECT_THROW(spectrum(bad), NumericError);
}

TEST(SingularValues, KnownFactorization) {
  std::mt19937_64 rng(2);
  for (int k = 0; k < 30; ++k) {
    const Eigen::Index rows = 1 + k % 4;
    const Eigen::Index cols = rows + k % 3;
    std::vector<double> sigma;
    for (Eigen::Index i = 0; i < rows; ++i) sigma.push_back(3.0 - 0.5 * static_cast<double>(i));
    Matrix S = Matrix::Zero(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) S(i, i) = sigma[static_cast<std::size_t>(i)];
    Matrix M = random_orthogonal(rng, rows) * S * random_orthogonal(rng, cols).transpose();
    auto s = singular_values(M);
    ASSERT_EQ(s.size(), sigma.size());
    for (std::size_t i = 0; i < s.size(); ++i) EXPECT_NEAR(s[i], sigma[i], 1e-12);
  }
}

TEST(SingularValues, RowVector) {
  Matrix r(1, 2);
  r << 1.5, 1.0;
  EXPECT_NEAR(singular_values(r)[0], std::sqrt(3.25), 1e-15);
}

TEST(NumericalRank, DropsTinyDirections) {
  Matrix M(2, 3);
  M << 1, 0, 0, 0, 1e-14, 0;
  EXPECT_EQ(numerical_rank(M), 1);
  M(1, 1) = 1e-6;
  EXPECT_EQ(numerical_rank(M), 2);
  EXPECT_EQ(numerical_rank(Matrix::Zero(3, 3), 1e-12), 0);
}

TEST(ComplexPencilRank, AgreesWithComplexElimination) {
  std::mt19937_64 rng(3);
  for (int k = 0; k < 100; ++k) {
    const Eigen::Index n = 1 + k % 5;
    const Eigen::Index m = 1 + k % 2;
    Matrix A = random_matrix(rng, n, n);
    Matrix B = random_matrix(rng, n, m);
    if (k % 3 == 0) {
      // Make the pair uncontrollable: a decoupled mode that B cannot reach.
      Matrix T = random_orthogonal(rng, n);
      Matrix At = T.transpose() * A * T;
      Matrix Bt = T.transpose() * B;
      At.row(n - 1).head(n - 1).setZero();
      Bt.row(n - 1).setZero();
      A = T * At * T.transpose();
      B = T * Bt;
    }
    for (auto lambda : spectrum(A)) {
      std::vector<std::vector<std::complex<double>>> M(static_cast<std::size_t>(n));
      for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) M[static_cast<std::size_t>(i)].push_back(A(i, j) - (i == j ? lambda : 0.0));
        for (Eigen::Index j = 0; j < m; ++j) M[static_cast<std::size_t>(i)].push_back(B(i, j));
      }
      EXPECT_EQ(complex_pencil_rank(A, lambda, B), complex_elimination_rank(M, 1e-7));
    }
  }
}

TEST(ComplexPencilRank, UncontrollableUnstableMode) {
  Matrix A(2, 2), B(2, 1);
  A << 1, 0, 0, 0;
  B << 0, 1;
  EXPECT_EQ(complex_pencil_rank(A, 1.0, B), 1);
  EXPECT_EQ(complex_pencil_rank(A, 0.0, B), 2);
}

TEST(MaxMatchedDistance, IsPermutationInvariant) {
  std::vector<ComplexValue> a{{1, 0}, {-1, 2}, {-1, -2}};
  std::vector<ComplexValue> b{{-1, -2}, {1, 1e-9}, {-1, 2}};
  EXPECT_NEAR(max_matched_distance(a, b), 1e-9, 1e-15);
  EXPECT_THROW(max_matched_distance(a, {{0, 0}}), NumericError);
}

}  // namespace
}  // namespace linopen
