// Prints one PASS/FAIL line per acceptance criterion; exits nonzero on any failure.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include "linear_systems.hpp"
#include "linopen/linopen.hpp"
#include "random_systems.hpp"

namespace {

using namespace linopen;
using namespace linopen::testing_support;

// Tolerances.
constexpr double kCovTol = 5e-4;
constexpr double kEtaTol = 5e-4;
constexpr double kAc1Seconds = 1.0;
constexpr double kPoleTol = 1e-8;
constexpr double kDecayNorm = 1e-3;
constexpr double kAc2Seconds = 2.0;
constexpr double kCoveringFactor = 1.5;
constexpr double kIdentityRatio = 0.9;
constexpr double kReciprocityTol = 1e-12;
constexpr double kPlacementTol = 1e-6;
constexpr double kHiddenTol = 1e-8;
constexpr double kJacobianTol = 1e-6;
constexpr double kFdStep = 1e-5;
constexpr double kDiscreteCovTol = 1e-9;
constexpr double kMinAlpha = 0.5;

struct Outcome {
  bool pass = true;
  std::string detail;
};

class Checker {
 public:
  void require(bool ok, const std::string& what) {
    if (!ok) {
      out_.pass = false;
      if (!out_.detail.empty()) out_.detail += "; ";
      out_.detail += what;
    }
  }
  void note(const std::string& s) { notes_ += (notes_.empty() ? "" : ", ") + s; }
  Outcome result() const {
    Outcome o = out_;
    if (o.pass) o.detail = notes_;
    return o;
  }

 private:
  Outcome out_;
  std::string notes_;
};

std::string num(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

SystemSpec fixture(const std::string& name) { return load_system(std::string(LINOPEN_SYSTEMS_DIR) + "/" + name); }

struct CliRun {
  int code = -1;
  std::string out;
};

CliRun cli(const std::string& args) {
  std::string cmd = std::string("\"") + LINOPEN_CLI + "\" " + args + " 2>/dev/null";
  CliRun r;
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return r;
  char buf[4096];
  std::size_t got;
  while ((got = fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, got);
  int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

Outcome ac1() {
  Checker c;
  auto t0 = std::chrono::steady_clock::now();
  auto s = fixture("three_state.stab");
  auto a = analyze_full(s);
  const double elapsed = seconds_since(t0);
  c.require(std::abs(a.openness.cov_bound - 0.6144) <= kCovTol, "cov = " + num(a.openness.cov_bound));
  c.require(a.profile.eta.is_finite() && std::abs(a.profile.eta.value() - 0.3162) <= kEtaTol,
            "eta_c = " + num(a.profile.eta.as_double()));
  c.require(a.openness.jacobian_rank == 3, "rank = " + std::to_string(a.openness.jacobian_rank));
  c.require(a.verdict.decision == Decision::exp_stabilizable_cont_feedback && a.verdict.deciding_rule == "R1",
            std::string("decision ") + std::string(to_string(a.verdict.decision)) + " via " + a.verdict.deciding_rule);
  c.require(elapsed < kAc1Seconds, "runtime " + num(elapsed) + " s");
  c.note("cov = " + num(a.openness.cov_bound) + ", eta_c = " + num(a.profile.eta.as_double()) + ", " +
         num(elapsed) + " s");
  return c.result();
}

Outcome ac2() {
  Checker c;
  auto t0 = std::chrono::steady_clock::now();
  auto s = fixture("planar_cubic.stab");
  auto v = analyze_continuous(s);
  c.require(is_positive(v.decision) && v.deciding_rule == "R2", "deciding rule " + v.deciding_rule);
  auto fb = parse_feedback("u1 = -x1 - x2", 1);
  const auto lin = jacobian(s);
  Matrix K = jacobian_at(fb.law_list(), s.equilibrium_x(), Vector::Zero(0)).A;
  auto poles = closed_loop_spectrum(lin.A, lin.B, K);
  const std::vector<ComplexValue> expected{{-0.5, -std::sqrt(3.0) / 2.0}, {-0.5, std::sqrt(3.0) / 2.0}};
  const double err = max_matched_distance(poles, expected);
  c.require(err <= kPoleTol, "pole error " + num(err));
  Vector x0(2);
  x0 << 0.1, 0.0;
  auto traj = integrate_closed_loop(s, fb, x0, 10.0, kDefaultStep);
  const double final_norm = traj.states.back().norm();
  c.require(!traj.diverged && final_norm <= kDecayNorm, "|x(10)| = " + num(final_norm));
  const double elapsed = seconds_since(t0);
  c.require(elapsed < kAc2Seconds, "runtime " + num(elapsed) + " s");
  c.note("pole error " + num(err) + ", |x(10)| = " + num(final_norm) + ", " + num(elapsed) + " s");
  return c.result();
}

Outcome ac3() {
  Checker c;
  auto s = fixture("hidden_unstable.stab");
  auto a = analyze_full(s);
  c.require(a.openness.jacobian_rank == 2, "rank = " + std::to_string(a.openness.jacobian_rank));
  c.require(!a.hautus.holds && a.hautus.failures.size() == 1 && std::abs(a.hautus.failures[0] - ComplexValue(1.0)) < 1e-9,
            "Hautus failure set");
  c.require(a.verdict.decision == Decision::inconclusive, "decision " + std::string(to_string(a.verdict.decision)));
  const bool warned = std::any_of(a.verdict.warnings.begin(), a.verdict.warnings.end(), [](const std::string& w) {
    return w.find("Hautus fails at λ=1") != std::string::npos;
  });
  c.require(warned, "missing Hautus warning");
  auto r = cli("synthesize " + std::string(LINOPEN_SYSTEMS_DIR) + "/hidden_unstable.stab");
  c.require(r.code == 3, "synthesize exit " + std::to_string(r.code));
  c.note("synthesize exit " + std::to_string(r.code));
  return c.result();
}

Outcome ac4() {
  Checker c;
  const std::vector<double> radii{0.1, 0.05, 0.025};
  auto cubic = covering_sweep(fixture("cubic.stab"), radii);
  for (std::size_t i = 0; i < cubic.samples.size(); ++i) {
    const auto& s = cubic.samples[i];
    const double exact = s.radius * s.radius;
    c.require(s.modulus <= kCoveringFactor * exact && s.modulus >= exact / kCoveringFactor,
              "cubic kappa_hat(" + num(s.radius) + ") = " + num(s.modulus));
    if (i > 0) c.require(s.ratio < cubic.samples[i - 1].ratio, "cubic ratio not strictly decreasing");
  }
  auto identity = covering_sweep(fixture("identity.stab"), radii);
  double worst = 1e300;
  for (const auto& s : identity.samples) worst = std::min(worst, s.modulus);
  c.require(worst >= kIdentityRatio, "identity kappa_hat = " + num(worst));
  c.note("cubic kappa_hat/r^2 at 0.025 = " + num(cubic.samples.back().modulus / (0.025 * 0.025)) +
         ", identity min kappa_hat = " + num(worst));
  return c.result();
}

Outcome ac5() {
  Checker c;
  std::mt19937_64 rng(1005);
  double worst = 0.0;
  for (int k = 0; k < 100; ++k) {
    const Eigen::Index n = 1 + k % 5, m = 1 + k % 3;
    Linearization lin{random_matrix(rng, n, n), random_matrix(rng, n, m)};
    auto r = openness_report(lin);
    c.require(r.linearly_open, "case " + std::to_string(k) + " rank deficient");
    if (!r.linearly_open) continue;
    worst = std::max(worst, std::abs(r.cov_bound * r.reg_bound.value() - 1.0));
  }
  c.require(worst <= kReciprocityTol, "max |cov*reg - 1| = " + num(worst));
  c.note("max |cov*reg - 1| = " + num(worst));
  return c.result();
}

std::vector<ComplexValue> random_poles(std::mt19937_64& rng, Eigen::Index n) {
  std::uniform_real_distribution<double> re(0.5, 3.0), im(0.2, 2.0), coin(0.0, 1.0);
  std::vector<ComplexValue> out;
  while (static_cast<Eigen::Index>(out.size()) < n) {
    if (static_cast<Eigen::Index>(out.size()) + 2 <= n && coin(rng) < 0.4) {
      ComplexValue p(-re(rng), im(rng));
      out.push_back(p);
      out.push_back(std::conj(p));
    } else {
      out.emplace_back(-re(rng), 0.0);
    }
  }
  return out;
}

Outcome ac6() {
  Checker c;
  std::mt19937_64 rng(1006);
  double worst = 0.0;
  for (int k = 0; k < 100; ++k) {
    const Eigen::Index n = 1 + k % 5, m = 1 + (k / 5) % 2;
    Matrix A = random_matrix(rng, n, n), B = random_matrix(rng, n, m);
    if (kalman_controllability_rank(A, B) < n) continue;
    auto poles = random_poles(rng, n);
    try {
      Matrix K = place_poles(A, B, poles, rng);
      worst = std::max(worst, max_matched_distance(closed_loop_spectrum(A, B, K), poles));
    } catch (const std::exception& e) {
      c.require(false, "case " + std::to_string(k) + ": " + e.what());
    }
  }
  c.require(worst <= kPlacementTol, "max pole error " + num(worst));
  double hidden_worst = 0.0;
  for (int k = 0; k < 30; ++k) {
    const Eigen::Index r = 1 + k % 3, h = 1 + k % 2, m = 1 + k % 2, n = r + h;
    Matrix At = Matrix::Zero(n, n);
    At.topLeftCorner(r, r) = random_matrix(rng, r, r);
    At.topRightCorner(r, h) = random_matrix(rng, r, h);
    std::vector<double> hidden;
    for (Eigen::Index i = 0; i < h; ++i) {
      hidden.push_back(-0.6 - 0.5 * static_cast<double>(i));
      At(r + i, r + i) = hidden.back();
    }
    Matrix Bt = Matrix::Zero(n, m);
    Bt.topRows(r) = random_matrix(rng, r, m);
    Matrix T = random_orthogonal(rng, n);
    auto g = synthesize_gain(T * At * T.transpose(), T * Bt, Mode::continuous);
    for (double l : hidden) {
      double best = 1e300;
      for (const auto& p : g.achieved_poles) best = std::min(best, std::abs(p - ComplexValue(l)));
      hidden_worst = std::max(hidden_worst, best);
    }
  }
  c.require(hidden_worst <= kHiddenTol, "uncontrollable spectrum moved by " + num(hidden_worst));
  c.note("max pole error " + num(worst) + ", uncontrollable drift " + num(hidden_worst));
  return c.result();
}

Outcome ac7() {
  Checker c;
  std::mt19937_64 rng(1007);
  double worst = 0.0;
  for (int k = 0; k < 100; ++k) {
    auto s = random_system(rng, 3, 2);
    auto ad = jacobian(s);
    auto fd = fd_linearization(s, kFdStep);
    auto rel = [](double a, double b) { return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)}); };
    for (Eigen::Index i = 0; i < ad.A.rows(); ++i) {
      for (Eigen::Index j = 0; j < ad.A.cols(); ++j) worst = std::max(worst, rel(ad.A(i, j), fd.A(i, j)));
      for (Eigen::Index j = 0; j < ad.B.cols(); ++j) worst = std::max(worst, rel(ad.B(i, j), fd.B(i, j)));
    }
  }
  c.require(worst <= kJacobianTol, "max relative deviation " + num(worst));
  c.note("max relative deviation " + num(worst));
  return c.result();
}

Outcome ac8() {
  Checker c;
  auto s = fixture("discrete15.stab");
  auto a = analyze_full(s);
  const double cov = a.openness.cov_bound;
  c.require(std::abs(cov - std::sqrt(3.25)) <= kDiscreteCovTol, "cov = " + num(cov));
  c.require(a.profile.eta.is_finite() && a.profile.eta.value() == 1.5, "eta_d = " + num(a.profile.eta.as_double()));
  c.require(cov > 1.5, "cov does not exceed eta_d");
  c.require(is_positive(a.verdict.decision) && a.verdict.deciding_rule == "D1",
            "deciding rule " + a.verdict.deciding_rule);
  auto g = synthesize(s);
  c.require(std::abs(g.achieved_poles.front() - ComplexValue(0.5)) <= kDiscreteCovTol,
            "closed-loop pole " + num(g.achieved_poles.front().real()));
  Vector x0(1);
  x0 << 0.1;
  auto fit = estimate_decay(iterate_closed_loop(s, Feedback::linear(g.K), x0, kDefaultIterations));
  c.require(fit.certified && fit.alpha_hat >= kMinAlpha, "alpha_hat = " + num(fit.alpha_hat));
  c.note("cov = " + num(cov) + ", K = " + num(g.K(0, 0)) + ", alpha_hat = " + num(fit.alpha_hat));
  return c.result();
}

Outcome ac9() {
  Checker c;
  std::mt19937_64 rng(1009);
  int mismatches = 0, uncontrollable = 0;
  for (int k = 0; k < 200; ++k) {
    const Eigen::Index n = 1 + k % 6, m = 1 + k % 2;
    Matrix A = random_matrix(rng, n, n), B = random_matrix(rng, n, m);
    if (k % 3 == 0 && n > 1) {
      Matrix T = random_orthogonal(rng, n);
      Matrix At = T.transpose() * A * T, Bt = T.transpose() * B;
      At.bottomLeftCorner(1, n - 1).setZero();
      Bt.bottomRows(1).setZero();
      A = T * At * T.transpose();
      B = T * Bt;
    }
    const bool kalman = kalman_controllability_rank(A, B) == n;
    if (!kalman) ++uncontrollable;
    if (hautus_full_spectrum(A, B) != kalman) ++mismatches;
  }
  c.require(mismatches == 0, std::to_string(mismatches) + " mismatches");
  c.require(uncontrollable > 0, "no uncontrollable pairs drawn");
  c.note("200 pairs, " + std::to_string(uncontrollable) + " uncontrollable, 0 mismatches");
  return c.result();
}

Outcome ac10() {
  Checker c;
  const std::string dir = LINOPEN_SYSTEMS_DIR;
  for (const std::string& args : {"--seed 17 analyze --json " + dir + "/three_state.stab",
                                 "--seed 17 synthesize --json " + dir + "/three_state.stab",
                                 "--seed 17 synthesize --force --json " + dir + "/shifted.stab"}) {
    auto a = cli(args), b = cli(args);
    c.require(a.code == 0 && b.code == 0, "exit codes for " + args);
    c.require(!a.out.empty() && a.out == b.out, "output differs for " + args);
  }
  c.note("3 invocations byte-identical");
  return c.result();
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"AC1 three-state regression", ac1},       {"AC2 planar regression", ac2},
      {"AC3 Hautus counterexample gate", ac3},   {"AC4 openness vs linear openness", ac4},
      {"AC5 cov/reg reciprocity", ac5},          {"AC6 placement accuracy", ac6},
      {"AC7 Jacobian vs finite differences", ac7}, {"AC8 discrete-time pipeline", ac8},
      {"AC9 Hautus/Kalman equivalence", ac9},    {"AC10 deterministic JSON", ac10},
  };
  int failures = 0;
  for (const auto& [name, fn] : criteria) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::printf("[%s] %s: %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
