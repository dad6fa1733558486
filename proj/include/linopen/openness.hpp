#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "linopen/errors.hpp"
#include "linopen/numlin.hpp"
#include "linopen/system.hpp"

namespace linopen {

/// Real number or a tagged infinity. Never produced by floating overflow.
class ExtendedReal {
 public:
  enum class Kind { finite, plus_infinity, minus_infinity };

  static ExtendedReal of(double v) { return ExtendedReal(Kind::finite, v); }
  static ExtendedReal plus_infinity() { return ExtendedReal(Kind::plus_infinity, 0.0); }
  static ExtendedReal minus_infinity() { return ExtendedReal(Kind::minus_infinity, 0.0); }

  Kind kind() const { return kind_; }
  bool is_finite() const { return kind_ == Kind::finite; }
  double value() const {
    if (!is_finite()) throw NumericError("ExtendedReal::value on an infinite sentinel");
    return value_;
  }
  /// IEEE view, for comparisons only.
  double as_double() const {
    switch (kind_) {
      case Kind::plus_infinity: return std::numeric_limits<double>::infinity();
      case Kind::minus_infinity: return -std::numeric_limits<double>::infinity();
      default: return value_;
    }
  }

  friend bool operator==(const ExtendedReal&, const ExtendedReal&) = default;

 private:
  ExtendedReal(Kind k, double v) : kind_(k), value_(v) {}
  Kind kind_;
  double value_;
};

struct OpennessReport {
  double cov_bound = 0.0;
  ExtendedReal reg_bound = ExtendedReal::plus_infinity();
  double lip_bound = 0.0;
  int jacobian_rank = 0;
  bool linearly_open = false;
  std::vector<double> singular_values;
  friend bool operator==(const OpennessReport&, const OpennessReport&) = default;
};

/// The n x (n+m) Jacobian [A | B] of f at the equilibrium.
inline Matrix full_jacobian(const Linearization& lin) { return hstack(lin.A, lin.B); }

/// Exact covering bound: the smallest singular value of [A | B], reported as 0
/// when [A | B] is numerically rank deficient.
inline double covering_bound(const Linearization& lin, double rank_relative = kDefaultRankRelative) {
  Matrix J = full_jacobian(lin);
  auto s = singular_values(J);
  int rank = numerical_rank(J, rank_tolerance(J, rank_relative));
  if (rank < J.rows()) return 0.0;
  return s[static_cast<std::size_t>(J.rows()) - 1];
}

inline ExtendedReal regularity_bound(const Linearization& lin,
                                     double rank_relative = kDefaultRankRelative) {
  double cov = covering_bound(lin, rank_relative);
  if (cov == 0.0) return ExtendedReal::plus_infinity();
  return ExtendedReal::of(1.0 / cov);
}

inline double lipschitz_bound(const Linearization& lin) {
  return singular_values(full_jacobian(lin)).front();
}

inline OpennessReport openness_report(const Linearization& lin,
                                      double rank_relative = kDefaultRankRelative) {
  OpennessReport r;
  Matrix J = full_jacobian(lin);
  r.singular_values = singular_values(J);
  r.jacobian_rank = numerical_rank(J, rank_tolerance(J, rank_relative));
  r.linearly_open = r.jacobian_rank == J.rows();
  r.cov_bound = r.linearly_open ? r.singular_values[static_cast<std::size_t>(J.rows()) - 1] : 0.0;
  r.reg_bound = r.cov_bound > 0.0 ? ExtendedReal::of(1.0 / r.cov_bound) : ExtendedReal::plus_infinity();
  r.lip_bound = r.singular_values.front();
  return r;
}

/// Lower bound on the covering bound of f - nu*x: the perturbation has
/// Lipschitz modulus nu.
inline double shifted_covering_lower_bound(double cov, double nu) {
  if (nu < 0.0) throw PreconditionError("shifted_covering_lower_bound: nu must be nonnegative");
  return cov - nu;
}

struct CoveringConfig {
  int domain_grid = 21;            // per-axis lattice points of the domain ball
  int sphere_targets = 16;         // target directions (per great circle for 2D targets)
  int ball_shells = 3;             // interior target shells, plus the centre
  double attain_tolerance = 1e-6;  // multiplied by r
  double resolution = 1e-3;        // relative bisection resolution on kappa
  int refine_iterations = 80;
};

namespace detail {

inline std::vector<Vector> unit_target_directions(Eigen::Index dim, int count) {
  std::vector<Vector> out;
  if (dim == 1) {
    Vector a(1), b(1);
    a << 1.0;
    b << -1.0;
    return {a, b};
  }
  if (dim == 2) {
    for (int k = 0; k < count; ++k) {
      double t = 2.0 * std::numbers::pi * k / count;
      Vector v(2);
      v << std::cos(t), std::sin(t);
      out.push_back(v);
    }
    return out;
  }
  // Fibonacci lattice on the 2-sphere, count^2/2 points.
  int total = std::max(8, count * count / 2);
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  for (int k = 0; k < total; ++k) {
    double z = 1.0 - 2.0 * (k + 0.5) / total;
    double rho = std::sqrt(1.0 - z * z);
    Vector v(3);
    v << rho * std::cos(golden * k), rho * std::sin(golden * k), z;
    out.push_back(v);
  }
  return out;
}

template <class Map>
Matrix fd_jacobian(const Map& f, const Vector& w, Eigen::Index rows, double h) {
  Matrix J(rows, w.size());
  for (Eigen::Index j = 0; j < w.size(); ++j) {
    Vector wp = w, wm = w;
    wp(j) += h;
    wm(j) -= h;
    J.col(j) = (f(wp) - f(wm)) / (2.0 * h);
  }
  return J;
}

/// Projected Levenberg-Marquardt on |f(w) - y| over the closed ball B_r(center).
template <class Map>
double refine_distance(const Map& f, const Vector& center, double r, Vector w, const Vector& y,
                       double tol, int iterations) {
  auto project = [&](Vector v) {
    Vector d = v - center;
    double nd = d.norm();
    if (nd > r) v = center + d * (r / nd);
    return v;
  };
  Vector res = f(w) - y;
  double cost = res.norm();
  double mu = -1.0;
  for (int it = 0; it < iterations && cost > tol; ++it) {
    Matrix J = fd_jacobian(f, w, y.size(), 1e-7 * r);
    Matrix H = J.transpose() * J;
    if (mu < 0.0) mu = 1e-8 * std::max(H.trace(), 1e-300);
    bool improved = false;
    for (int tries = 0; tries < 12 && !improved; ++tries) {
      Matrix damped = H + mu * Matrix::Identity(H.rows(), H.cols());
      Vector step = damped.ldlt().solve(-J.transpose() * res);
      Vector cand = project(w + step);
      Vector cres = f(cand) - y;
      if (cres.norm() < cost) {
        w = cand;
        res = cres;
        cost = cres.norm();
        mu = std::max(mu / 3.0, 1e-300);
        improved = true;
      } else {
        mu *= 4.0;
      }
    }
    if (!improved) break;
  }
  return cost;
}

}  // namespace detail

/// Largest kappa (to the configured relative resolution) such that every grid
/// target in the ball of radius kappa*r around f(center) is reached, within
/// attain_tolerance*r, from some point of B_r(center). Brute force, l <= 3.
template <class Map>
double empirical_covering_modulus(const Map& f, const Vector& center, double r,
                                  const CoveringConfig& cfg = {}) {
  const Eigen::Index l = center.size();
  if (l < 1 || l > 3) {
    throw PreconditionError("empirical covering oracle supports at most 3 input dimensions, got " +
                            std::to_string(l));
  }
  if (!(r > 0.0)) throw PreconditionError("empirical covering oracle: radius must be positive");
  const Vector y0 = f(center);
  const Eigen::Index n = y0.size();
  if (n > l) throw PreconditionError("empirical covering oracle: output dimension exceeds input");

  std::vector<Vector> domain;
  std::vector<Vector> images;
  const int g = std::max(cfg.domain_grid, 3);
  std::vector<int> idx(static_cast<std::size_t>(l), 0);
  for (;;) {
    Vector p(l);
    for (Eigen::Index d = 0; d < l; ++d) p(d) = -1.0 + 2.0 * idx[static_cast<std::size_t>(d)] / (g - 1);
    if (p.norm() <= 1.0 + 1e-12) {
      if (p.norm() > 1.0) p.normalize();
      Vector w = center + r * p;
      domain.push_back(w);
      images.push_back(f(w));
    }
    std::size_t d = 0;
    while (d < idx.size() && ++idx[d] == g) idx[d++] = 0;
    if (d == idx.size()) break;
  }

  const auto directions = detail::unit_target_directions(n, cfg.sphere_targets);
  const double tol = cfg.attain_tolerance * r;

  auto attained = [&](const Vector& y) {
    std::vector<std::pair<double, std::size_t>> best;
    for (std::size_t k = 0; k < images.size(); ++k) best.emplace_back((images[k] - y).norm(), k);
    std::size_t keep = std::min<std::size_t>(3, best.size());
    std::partial_sort(best.begin(), best.begin() + static_cast<std::ptrdiff_t>(keep), best.end());
    for (std::size_t s = 0; s < keep; ++s) {
      if (best[s].first <= tol) return true;
      if (detail::refine_distance(f, center, r, domain[best[s].second], y, tol,
                                  cfg.refine_iterations) <= tol) {
        return true;
      }
    }
    return false;
  };

  auto feasible = [&](double kappa) {
    const double rho = kappa * r;
    if (!attained(y0)) return false;
    for (int shell = cfg.ball_shells; shell >= 1; --shell) {
      double scale = rho * shell / cfg.ball_shells;
      for (const auto& dir : directions) {
        if (!attained(y0 + scale * dir)) return false;
      }
    }
    return true;
  };

  double reach = 0.0;
  for (const auto& img : images) reach = std::max(reach, (img - y0).norm());
  double hi = 2.0 * reach / r + 1e-300;
  for (int i = 0; i < 40 && feasible(hi); ++i) hi *= 2.0;
  double lo = 0.0;
  while (hi - lo > cfg.resolution * hi && hi > 1e-300) {
    double mid = 0.5 * (lo + hi);
    if (feasible(mid)) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return lo;
}

/// Oracle applied to z -> f(x, u) at z = (x*, u*).
inline double empirical_covering_modulus(const SystemSpec& system, double r,
                                         const CoveringConfig& cfg = {}) {
  const Eigen::Index n = system.n();
  const Eigen::Index m = system.m();
  if (n + m > 3) {
    throw PreconditionError("covering sweep requires states + controls <= 3, got " +
                            std::to_string(n + m));
  }
  Vector center(n + m);
  center << system.equilibrium_x(), system.equilibrium_u();
  auto map = [&](const Vector& z) { return system.eval(z.head(n), z.tail(m)); };
  return empirical_covering_modulus(map, center, r, cfg);
}

struct CoveringSample {
  double radius = 0.0;
  double modulus = 0.0;
  double ratio = 0.0;  // modulus / radius
};

struct CoveringSweep {
  std::vector<CoveringSample> samples;
  bool linear_openness_suspect = false;
};

/// Runs the oracle at each radius. Flags the sweep when kappa/r at the smallest
/// radius is less than half its value at the largest radius.
inline CoveringSweep covering_sweep(const SystemSpec& system, std::vector<double> radii,
                                    const CoveringConfig& cfg = {}) {
  CoveringSweep sweep;
  for (double r : radii) {
    double k = empirical_covering_modulus(system, r, cfg);
    sweep.samples.push_back({r, k, k / r});
  }
  if (sweep.samples.size() >= 2) {
    auto by_radius = sweep.samples;
    std::sort(by_radius.begin(), by_radius.end(),
              [](const CoveringSample& a, const CoveringSample& b) { return a.radius < b.radius; });
    sweep.linear_openness_suspect = by_radius.front().ratio * 2.0 < by_radius.back().ratio;
  }
  return sweep;
}

}  // namespace linopen
