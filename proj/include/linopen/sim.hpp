#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "linopen/errors.hpp"
#include "linopen/expr.hpp"
#include "linopen/numlin.hpp"
#include "linopen/sampling.hpp"
#include "linopen/system.hpp"

namespace linopen {

inline constexpr double kDivergenceNorm = 1e6;
inline constexpr double kRichardsonTolerance = 1e-8;
inline constexpr double kDefaultHorizon = 20.0;
inline constexpr double kDefaultStep = 1e-3;
inline constexpr int kDefaultIterations = 200;

/// State feedback: either u = u* + K (x - x*) or explicit laws u_i = h_i(x).
class Feedback {
 public:
  static Feedback linear(Matrix K) {
    Feedback f;
    f.gain_ = std::move(K);
    return f;
  }

  static Feedback laws(std::vector<Expr> laws) {
    Feedback f;
    for (const auto& e : laws) {
      if (mentions_control(*e)) throw ValidationError("feedback laws may only depend on the state");
    }
    f.laws_ = std::move(laws);
    return f;
  }

  bool is_linear() const { return gain_.has_value(); }
  const Matrix& gain() const { return *gain_; }
  const std::vector<Expr>& law_list() const { return laws_; }

  /// False when some law is not recognized as C1 everywhere; uniqueness of the
  /// closed-loop solution is then not guaranteed.
  bool is_c1() const {
    return std::all_of(laws_.begin(), laws_.end(), [](const Expr& e) { return is_globally_c1(*e); });
  }

  std::string describe() const {
    if (is_linear()) {
      std::string s = "linear gain K = [";
      for (Eigen::Index i = 0; i < gain_->rows(); ++i) {
        if (i) s += "; ";
        for (Eigen::Index j = 0; j < gain_->cols(); ++j) {
          if (j) s += ", ";
          s += detail::format_number((*gain_)(i, j));
        }
      }
      return s + "]";
    }
    std::string s;
    for (std::size_t i = 0; i < laws_.size(); ++i) {
      if (i) s += "; ";
      s += "u" + std::to_string(i + 1) + " = " + unparse(laws_[i]);
    }
    return s;
  }

  Vector control(const SystemSpec& system, const Vector& x) const {
    if (is_linear()) {
      if (gain_->rows() != system.m() || gain_->cols() != system.n()) {
        throw ValidationError("feedback gain must be " + std::to_string(system.m()) + "x" +
                              std::to_string(system.n()));
      }
      return system.equilibrium_u() + *gain_ * (x - system.equilibrium_x());
    }
    if (static_cast<int>(laws_.size()) != system.m()) {
      throw ValidationError("expected " + std::to_string(system.m()) + " feedback laws, got " +
                            std::to_string(laws_.size()));
    }
    return evaluate_components(laws_, x, Vector());
  }

 private:
  std::optional<Matrix> gain_;
  std::vector<Expr> laws_;
};

/// Parses "u1 = expr; u2 = expr" (semicolons or newlines) into feedback laws.
inline Feedback parse_feedback(std::string_view text, int m) {
  std::vector<Expr> laws(static_cast<std::size_t>(m));
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find_first_of(";\n", start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view item = detail::trim(text.substr(start, end - start));
    start = end + 1;
    if (item.empty()) continue;
    auto eq = item.find('=');
    if (eq == std::string_view::npos) throw ValidationError("feedback law needs the form u<i> = expr");
    std::string_view lhs = detail::trim(item.substr(0, eq));
    std::string_view digits = lhs.substr(lhs.starts_with("u_") ? 2 : 1);
    if (!lhs.starts_with('u') || digits.empty() ||
        !std::all_of(digits.begin(), digits.end(), [](char c) { return c >= '0' && c <= '9'; })) {
      throw ValidationError("feedback law target must be u<i>, got \"" + std::string(lhs) + "\"");
    }
    int index = std::stoi(std::string(digits));
    if (index < 1 || index > m) throw ValidationError("feedback law for nonexistent control " + std::string(lhs));
    if (laws[static_cast<std::size_t>(index) - 1]) throw ValidationError("duplicate feedback law for " + std::string(lhs));
    laws[static_cast<std::size_t>(index) - 1] = parse_expr(item.substr(eq + 1));
  }
  for (int i = 0; i < m; ++i) {
    if (!laws[static_cast<std::size_t>(i)]) throw ValidationError("missing feedback law for u" + std::to_string(i + 1));
  }
  return Feedback::laws(std::move(laws));
}

struct Trajectory {
  Mode mode = Mode::continuous;
  std::vector<double> times;
  std::vector<Vector> states;
  Vector equilibrium;
  std::string feedback_used;
  bool diverged = false;
};

namespace detail {

inline Vector closed_loop_rhs(const SystemSpec& system, const Feedback& fb, const Vector& x) {
  return system.eval(x, fb.control(system, x));
}

inline Vector rk4_step(const SystemSpec& system, const Feedback& fb, const Vector& x, double h) {
  Vector k1 = closed_loop_rhs(system, fb, x);
  Vector k2 = closed_loop_rhs(system, fb, x + 0.5 * h * k1);
  Vector k3 = closed_loop_rhs(system, fb, x + 0.5 * h * k2);
  Vector k4 = closed_loop_rhs(system, fb, x + h * k3);
  return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

inline Trajectory start_trajectory(const SystemSpec& system, const Feedback& fb, const Vector& x0) {
  if (x0.size() != system.n()) {
    throw ValidationError("initial state needs " + std::to_string(system.n()) + " entries");
  }
  Trajectory t;
  t.mode = system.mode();
  t.equilibrium = system.equilibrium_x();
  t.feedback_used = fb.describe();
  t.times.push_back(0.0);
  t.states.push_back(x0);
  return t;
}

}  // namespace detail

/// Classical RK4 with fixed step dt. A step is redone as two half steps when
/// the Richardson estimate |y_half - y_full| / 15 exceeds 1e-8.
inline Trajectory integrate_closed_loop(const SystemSpec& system, const Feedback& fb, const Vector& x0,
                                        double T, double dt) {
  if (system.mode() != Mode::continuous) throw PreconditionError("integrate_closed_loop: system is discrete");
  if (!(dt > 0.0) || !(T >= dt)) throw PreconditionError("integrate_closed_loop: need dt > 0 and T >= dt");
  Trajectory traj = detail::start_trajectory(system, fb, x0);
  const auto steps = static_cast<long>(std::ceil(T / dt - 1e-9));
  Vector x = x0;
  for (long k = 0; k < steps; ++k) {
    const double t0 = static_cast<double>(k) * dt;
    const double t1 = std::min(T, static_cast<double>(k + 1) * dt);
    const double h = t1 - t0;
    Vector next;
    try {
      Vector full = detail::rk4_step(system, fb, x, h);
      Vector half = detail::rk4_step(system, fb, detail::rk4_step(system, fb, x, 0.5 * h), 0.5 * h);
      next = (half - full).norm() / 15.0 > kRichardsonTolerance ? half : full;
    } catch (const EvalError&) {
      traj.diverged = true;
      break;
    }
    if (!next.allFinite()) {
      traj.diverged = true;
      break;
    }
    traj.times.push_back(t1);
    traj.states.push_back(next);
    if (next.norm() > kDivergenceNorm) {
      traj.diverged = true;
      break;
    }
    x = next;
  }
  return traj;
}

inline Trajectory iterate_closed_loop(const SystemSpec& system, const Feedback& fb, const Vector& x0,
                                      int steps) {
  if (system.mode() != Mode::discrete) throw PreconditionError("iterate_closed_loop: system is continuous");
  if (steps < 0) throw PreconditionError("iterate_closed_loop: steps must be nonnegative");
  Trajectory traj = detail::start_trajectory(system, fb, x0);
  Vector x = x0;
  for (int k = 1; k <= steps; ++k) {
    Vector next;
    try {
      next = detail::closed_loop_rhs(system, fb, x);
    } catch (const EvalError&) {
      traj.diverged = true;
      break;
    }
    if (!next.allFinite()) {
      traj.diverged = true;
      break;
    }
    traj.times.push_back(static_cast<double>(k));
    traj.states.push_back(next);
    if (next.norm() > kDivergenceNorm) {
      traj.diverged = true;
      break;
    }
    x = next;
  }
  return traj;
}

struct DecayFit {
  double M_hat = 1.0;
  double alpha_hat = 0.0;
  double residual = 0.0;
  bool certified = false;
  friend bool operator==(const DecayFit&, const DecayFit&) = default;
};

/// Rates at or below this are treated as no decay.
inline constexpr double kMinCertifiedRate = 1e-9;

/// Least-squares fit of log |x(t) - x*| after a 10% transient skip.
inline DecayFit estimate_decay(const Trajectory& traj) {
  if (traj.states.empty()) throw PreconditionError("estimate_decay: empty trajectory");
  const std::size_t count = traj.states.size();
  std::vector<double> e(count);
  for (std::size_t j = 0; j < count; ++j) {
    e[j] = std::max((traj.states[j] - traj.equilibrium).norm(), 1e-300);
  }
  const double e0 = (traj.states.front() - traj.equilibrium).norm();
  if (!(e0 > 0.0)) throw PreconditionError("estimate_decay: initial state is the equilibrium");
  DecayFit fit;
  std::size_t first = count / 10;
  if (count - first < 2) first = 0;
  if (count < 2) return fit;
  double st = 0, sy = 0, stt = 0, sty = 0;
  const double w = static_cast<double>(count - first);
  for (std::size_t j = first; j < count; ++j) {
    const double t = traj.times[j];
    const double y = std::log(e[j]);
    st += t;
    sy += y;
    stt += t * t;
    sty += t * y;
  }
  const double denom = w * stt - st * st;
  const double slope = denom != 0.0 ? (w * sty - st * sy) / denom : 0.0;
  const double intercept = (sy - slope * st) / w;
  double ss = 0.0;
  for (std::size_t j = first; j < count; ++j) {
    const double r = std::log(e[j]) - (intercept + slope * traj.times[j]);
    ss += r * r;
  }
  fit.residual = std::sqrt(ss / w);
  fit.alpha_hat = -slope;
  double M = 1.0;
  for (std::size_t j = 0; j < count; ++j) {
    M = std::max(M, e[j] * std::exp(fit.alpha_hat * traj.times[j]) / e0);
  }
  fit.M_hat = M;
  fit.certified = !traj.diverged && fit.alpha_hat > kMinCertifiedRate && std::isfinite(M);
  return fit;
}

struct Horizon {
  double T = kDefaultHorizon;
  double dt = kDefaultStep;
  int steps = kDefaultIterations;
};

inline Trajectory run_closed_loop(const SystemSpec& system, const Feedback& fb, const Vector& x0,
                                  const Horizon& horizon) {
  return system.mode() == Mode::continuous ? integrate_closed_loop(system, fb, x0, horizon.T, horizon.dt)
                                           : iterate_closed_loop(system, fb, x0, horizon.steps);
}

struct StabilityCheck {
  bool pass = false;
  DecayFit worst;
  std::vector<Vector> failures;
  int samples = 0;
  double delta = 0.0;
};

/// Samples initial states on the spheres of radii delta, delta/2, delta/4
/// around x* (round robin over shells, low-discrepancy directions). Passing
/// is empirical evidence, not a proof.
inline StabilityCheck verify_local_stability(const SystemSpec& system, const Feedback& fb, double delta,
                                             int samples, const Horizon& horizon = {}) {
  if (!(delta > 0.0)) throw PreconditionError("verify_local_stability: delta must be positive");
  if (samples < 1) throw PreconditionError("verify_local_stability: need at least one sample");
  StabilityCheck check;
  check.samples = samples;
  check.delta = delta;
  bool have_worst = false;
  for (int k = 0; k < samples; ++k) {
    const double radius = delta / static_cast<double>(1 << (k % 3));
    const Vector x0 = system.equilibrium_x() +
                      radius * sampling::sphere_point(static_cast<std::size_t>(k), system.n());
    DecayFit fit;
    try {
      fit = estimate_decay(run_closed_loop(system, fb, x0, horizon));
    } catch (const std::runtime_error&) {
      fit.certified = false;
      fit.alpha_hat = -std::numeric_limits<double>::infinity();
    }
    if (!fit.certified) check.failures.push_back(x0);
    if (!have_worst || fit.alpha_hat < check.worst.alpha_hat ||
        (fit.alpha_hat == check.worst.alpha_hat && fit.M_hat > check.worst.M_hat)) {
      check.worst = fit;
      have_worst = true;
    }
  }
  check.pass = check.failures.empty();
  return check;
}

/// CSV with header "t,x1,...,xn" and 17 significant digits.
inline std::string trajectory_csv(const Trajectory& traj) {
  std::string out = "t";
  const Eigen::Index n = traj.states.empty() ? 0 : traj.states.front().size();
  for (Eigen::Index i = 0; i < n; ++i) out += ",x" + std::to_string(i + 1);
  out += "\n";
  char buf[32];
  for (std::size_t j = 0; j < traj.states.size(); ++j) {
    std::snprintf(buf, sizeof buf, "%.17g", traj.times[j]);
    out += buf;
    for (Eigen::Index i = 0; i < n; ++i) {
      std::snprintf(buf, sizeof buf, ",%.17g", traj.states[j](i));
      out += buf;
    }
    out += "\n";
  }
  return out;
}

}  // namespace linopen
