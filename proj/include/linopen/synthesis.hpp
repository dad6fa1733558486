#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "linopen/errors.hpp"
#include "linopen/expr.hpp"
#include "linopen/hautus.hpp"
#include "linopen/numlin.hpp"
#include "linopen/system.hpp"

namespace linopen {

/// Linear state feedback u = u* + K (x - x*).
struct FeedbackGain {
  Matrix K;
  std::vector<ComplexValue> target_poles;
  std::vector<ComplexValue> achieved_poles;
  Mode mode = Mode::continuous;
  int controllable_dim = 0;
};

struct Staircase {
  Matrix transform;  // orthogonal; leading columns span the controllable subspace
  int controllable_dim = 0;
};

inline constexpr double kPlacementTolerance = 1e-6;
inline constexpr int kSylvesterRedraws = 5;
inline constexpr double kSylvesterConditionLimit = 1e12;

/// Orthonormal Krylov staircase: the controllable subspace is grown block by
/// block from range(B), each new block orthogonalized twice against the
/// previous ones and truncated by SVD rank.
inline Staircase staircase_decompose(const Matrix& A, const Matrix& B,
                                     double rank_relative = kDefaultRankRelative) {
  const Eigen::Index n = A.rows();
  if (A.cols() != n || B.rows() != n) throw NumericError("staircase: dimension mismatch");
  Staircase s;
  const double scale = std::max({1.0, A.norm(), B.norm()});
  const double tol = rank_relative * scale * static_cast<double>(std::max<Eigen::Index>(n, 1));

  Matrix basis(n, 0);
  auto append_range = [&](Matrix Z) {
    for (int pass = 0; pass < 2 && basis.cols() > 0; ++pass) Z -= basis * (basis.transpose() * Z);
    if (Z.cols() == 0 || Z.isZero(0.0)) return 0;
    Eigen::JacobiSVD<Matrix> svd(Z, Eigen::ComputeFullU);
    Eigen::Index r = 0;
    while (r < svd.singularValues().size() && svd.singularValues()(r) > tol) ++r;
    r = std::min(r, n - basis.cols());
    if (r == 0) return 0;
    Matrix grown(n, basis.cols() + r);
    grown << basis, svd.matrixU().leftCols(r);
    basis = grown;
    return static_cast<int>(r);
  };

  int added = append_range(B);
  while (added > 0 && basis.cols() < n) {
    Matrix Z = A * basis.rightCols(added);
    added = append_range(Z);
  }
  s.controllable_dim = static_cast<int>(basis.cols());
  if (s.controllable_dim == 0) {
    s.transform = Matrix::Identity(n, n);
  } else {
    Eigen::HouseholderQR<Matrix> qr(basis);
    Matrix Q = qr.householderQ() * Matrix::Identity(n, n);
    Q.leftCols(s.controllable_dim) = basis;
    // Re-orthogonalize the complement against the basis.
    for (Eigen::Index j = s.controllable_dim; j < n; ++j) {
      Vector v = Q.col(j);
      for (int pass = 0; pass < 2; ++pass) v -= Q.leftCols(j) * (Q.leftCols(j).transpose() * v);
      Q.col(j) = v.normalized();
    }
    s.transform = Q;
  }
  return s;
}

inline std::vector<ComplexValue> closed_loop_spectrum(const Matrix& A, const Matrix& B, const Matrix& K) {
  return spectrum(A + B * K);
}

namespace detail {

inline void check_conjugate_closed(const std::vector<ComplexValue>& poles) {
  std::vector<bool> used(poles.size(), false);
  for (std::size_t i = 0; i < poles.size(); ++i) {
    if (used[i] || poles[i].imag() == 0.0) continue;
    bool found = false;
    for (std::size_t j = 0; j < poles.size() && !found; ++j) {
      if (j == i || used[j]) continue;
      if (std::abs(poles[j] - std::conj(poles[i])) <= 1e-9 * (1.0 + std::abs(poles[i]))) {
        used[i] = used[j] = true;
        found = true;
      }
    }
    if (!found) throw PreconditionError("desired poles are not closed under conjugation");
  }
}

inline Vector real_coefficients(const std::vector<ComplexValue>& roots) {
  // Monic polynomial coefficients, highest degree first.
  std::vector<ComplexValue> c{1.0};
  for (const auto& r : roots) {
    std::vector<ComplexValue> next(c.size() + 1, 0.0);
    for (std::size_t i = 0; i < c.size(); ++i) {
      next[i] += c[i];
      next[i + 1] -= r * c[i];
    }
    c = next;
  }
  Vector out(static_cast<Eigen::Index>(c.size()));
  for (std::size_t i = 0; i < c.size(); ++i) out(static_cast<Eigen::Index>(i)) = c[i].real();
  return out;
}

inline Matrix ackermann(const Matrix& A, const Matrix& b, const std::vector<ComplexValue>& poles) {
  const Eigen::Index n = A.rows();
  Matrix C(n, n);
  C.col(0) = b.col(0);
  for (Eigen::Index i = 1; i < n; ++i) C.col(i) = A * C.col(i - 1);
  Vector coeff = real_coefficients(poles);
  Matrix phi = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i <= n; ++i) phi = phi * A + coeff(i) * Matrix::Identity(n, n);
  Vector en = Vector::Zero(n);
  en(n - 1) = 1.0;
  Vector row = C.transpose().fullPivLu().solve(en);
  return -(row.transpose() * phi);
}

/// Real Sylvester placement: X solves A X - X L = -B G with L the real block
/// diagonal form of the poles; K = G X^{-1}.
inline std::optional<Matrix> sylvester_place(const Matrix& A, const Matrix& B,
                                             const std::vector<ComplexValue>& poles,
                                             std::mt19937_64& rng) {
  const Eigen::Index n = A.rows();
  const Eigen::Index m = B.cols();
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix G(m, n);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) G(i, j) = normal(rng);
  }
  Matrix X(n, n);
  const Matrix I = Matrix::Identity(n, n);
  std::vector<bool> used(poles.size(), false);
  Eigen::Index col = 0;
  for (std::size_t k = 0; k < poles.size(); ++k) {
    if (used[k]) continue;
    used[k] = true;
    const ComplexValue p = poles[k];
    if (p.imag() == 0.0) {
      X.col(col) = (A - p.real() * I).fullPivLu().solve(-B * G.col(col));
      ++col;
      continue;
    }
    for (std::size_t j = k + 1; j < poles.size(); ++j) {
      if (!used[j] && std::abs(poles[j] - std::conj(p)) <= 1e-9 * (1.0 + std::abs(p))) {
        used[j] = true;
        break;
      }
    }
    const double a = p.real();
    const double b = std::abs(p.imag());
    // Block [[a, b], [-b, a]] acting on columns (x1, x2).
    Matrix M(2 * n, 2 * n);
    M << A - a * I, b * I, -b * I, A - a * I;
    Vector rhs(2 * n);
    rhs << -B * G.col(col), -B * G.col(col + 1);
    Vector sol = M.fullPivLu().solve(rhs);
    X.col(col) = sol.head(n);
    X.col(col + 1) = sol.tail(n);
    col += 2;
  }
  Eigen::JacobiSVD<Matrix> svd(X);
  const auto& sv = svd.singularValues();
  if (sv(n - 1) == 0.0 || sv(0) / sv(n - 1) > kSylvesterConditionLimit) return std::nullopt;
  return Matrix(G * X.inverse());
}

}  // namespace detail

/// K with spectrum(A + B K) equal to `desired` (u = K x convention).
inline Matrix place_poles(const Matrix& A, const Matrix& B, const std::vector<ComplexValue>& desired,
                          std::mt19937_64& rng, double rank_relative = kDefaultRankRelative) {
  const Eigen::Index n = A.rows();
  if (A.cols() != n || B.rows() != n) throw NumericError("place_poles: dimension mismatch");
  if (static_cast<Eigen::Index>(desired.size()) != n) {
    throw PreconditionError("place_poles: expected " + std::to_string(n) + " poles, got " +
                            std::to_string(desired.size()));
  }
  detail::check_conjugate_closed(desired);
  if (kalman_controllability_rank(A, B, rank_relative) < n) {
    throw PreconditionError("place_poles: (A, B) is not controllable");
  }
  const auto open_loop = spectrum(A);
  for (const auto& p : desired) {
    for (const auto& l : open_loop) {
      if (std::abs(p - l) <= 1e-8 * (1.0 + std::abs(l))) {
        throw PreconditionError("place_poles: desired pole " + format_complex(p) +
                                " coincides with an open-loop eigenvalue");
      }
    }
  }
  auto accurate = [&](const Matrix& K) {
    return K.allFinite() && max_matched_distance(closed_loop_spectrum(A, B, K), desired) <= kPlacementTolerance;
  };
  if (B.cols() == 1) {
    Matrix K = detail::ackermann(A, B, desired);
    if (accurate(K)) return K;
  }
  for (int attempt = 0; attempt <= kSylvesterRedraws; ++attempt) {
    auto K = detail::sylvester_place(A, B, desired, rng);
    if (K && accurate(*K)) return *K;
  }
  throw NumericError("place_poles: Sylvester solution stayed ill-conditioned after " +
                     std::to_string(kSylvesterRedraws) + " redraws");
}

inline Matrix place_poles(const Matrix& A, const Matrix& B, const std::vector<ComplexValue>& desired) {
  std::mt19937_64 rng(0);
  return place_poles(A, B, desired, rng);
}

inline bool is_stable_pole(ComplexValue p, Mode mode) {
  return mode == Mode::continuous ? p.real() < 0.0 : std::abs(p) < 1.0;
}

/// Real poles -(eta + 1), -(eta + 1.5), ... in continuous time; 0.5, 0.45, ...
/// in discrete time, with the spacing shrunk so that every pole stays in (-1, 1).
inline std::vector<ComplexValue> default_poles(int count, Mode mode, double eta_tilde) {
  std::vector<ComplexValue> out;
  const double step = mode == Mode::discrete ? std::min(0.05, 1.4 / std::max(count, 1)) : 0.5;
  for (int k = 0; k < count; ++k) {
    out.emplace_back(mode == Mode::continuous ? -(eta_tilde + 1.0 + step * k) : 0.5 - step * k, 0.0);
  }
  return out;
}

struct SynthesisOptions {
  std::optional<std::vector<ComplexValue>> poles;
  std::uint64_t seed = 0;
  double rank_relative = kDefaultRankRelative;
  double tol_class = kDefaultClassTolerance;
};

inline FeedbackGain synthesize_gain(const Matrix& A, const Matrix& B, Mode mode,
                                    const SynthesisOptions& opts = {}) {
  const Eigen::Index n = A.rows();
  const Eigen::Index m = B.cols();
  const auto profile = spectral_profile(A, mode, opts.tol_class);
  const auto hautus = hautus_asymptotic(A, B, profile, opts.rank_relative);
  if (!hautus.holds) {
    throw PreconditionError("uncontrollable unstable mode at λ=" + format_complex(hautus.failures.front()));
  }
  FeedbackGain gain;
  gain.mode = mode;
  const Staircase st = staircase_decompose(A, B, opts.rank_relative);
  const int r = st.controllable_dim;
  gain.controllable_dim = r;
  gain.K = Matrix::Zero(m, n);
  if (r > 0) {
    const Matrix T1 = st.transform.leftCols(r);
    const Matrix A11 = T1.transpose() * A * T1;
    const Matrix B1 = T1.transpose() * B;
    std::vector<ComplexValue> poles;
    if (opts.poles) {
      poles = *opts.poles;
      if (static_cast<int>(poles.size()) != r) {
        throw PreconditionError("expected " + std::to_string(r) + " poles for the controllable block, got " +
                                std::to_string(poles.size()));
      }
    } else {
      poles = default_poles(r, mode, profile.eta_tilde);
      const auto block = spectrum(A11);
      for (auto& p : poles) {
        for (int tries = 0; tries < 16; ++tries) {
          bool clash = std::any_of(block.begin(), block.end(), [&](ComplexValue l) {
            return std::abs(p - l) <= 1e-6 * (1.0 + std::abs(l));
          });
          if (!clash) break;
          p -= mode == Mode::continuous ? 0.1 : 0.01;
        }
      }
    }
    gain.target_poles = poles;
    std::mt19937_64 rng(opts.seed);
    const Matrix K1 = place_poles(A11, B1, poles, rng, opts.rank_relative);
    gain.K = K1 * T1.transpose();
  }
  gain.achieved_poles = closed_loop_spectrum(A, B, gain.K);
  for (const auto& p : gain.achieved_poles) {
    if (!is_stable_pole(p, mode)) {
      throw NumericError("synthesized gain leaves closed-loop pole " + format_complex(p) + " unstable");
    }
  }
  return gain;
}

inline FeedbackGain synthesize(const SystemSpec& system, const SynthesisOptions& opts = {}) {
  const auto lin = jacobian(system);
  return synthesize_gain(lin.A, lin.B, system.mode(), opts);
}

/// One feedback law per control, "u1 = u*_1 + K11*(x1 - x*_1) + ...", in the
/// grammar the simulator loads.
inline std::vector<std::string> gain_expressions(const Matrix& K, const Vector& x_eq, const Vector& u_eq) {
  std::vector<std::string> out;
  for (Eigen::Index i = 0; i < K.rows(); ++i) {
    std::string s;
    auto append = [&](double c, const std::string& term) {
      if (s.empty()) {
        s = c < 0 ? "-" : "";
      } else {
        s += c < 0 ? " - " : " + ";
      }
      const double a = std::abs(c);
      s += term.empty() ? detail::format_number(a) : detail::format_number(a) + "*" + term;
    };
    if (u_eq(i) != 0.0) append(u_eq(i), "");
    for (Eigen::Index j = 0; j < K.cols(); ++j) {
      if (K(i, j) == 0.0) continue;
      std::string var = "x" + std::to_string(j + 1);
      if (x_eq(j) != 0.0) {
        var = "(" + var + (x_eq(j) < 0 ? " + " : " - ") + detail::format_number(std::abs(x_eq(j))) + ")";
      }
      append(K(i, j), var);
    }
    if (s.empty()) s = "0";
    out.push_back("u" + std::to_string(i + 1) + " = " + s);
  }
  return out;
}

}  // namespace linopen
