#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "linopen/control_affine.hpp"
#include "linopen/hautus.hpp"
#include "linopen/numlin.hpp"
#include "linopen/openness.hpp"
#include "linopen/system.hpp"

namespace linopen {

enum class Decision {
  exp_stabilizable_cont_feedback,
  asy_stabilizable_cont_feedback,
  not_smoothly_exp_stabilizable,
  not_smoothly_asy_stabilizable,
  inconclusive,
};

inline std::string_view to_string(Decision d) {
  switch (d) {
    case Decision::exp_stabilizable_cont_feedback: return "EXP_STABILIZABLE_CONT_FEEDBACK";
    case Decision::asy_stabilizable_cont_feedback: return "ASY_STABILIZABLE_CONT_FEEDBACK";
    case Decision::not_smoothly_exp_stabilizable: return "NOT_SMOOTHLY_EXP_STABILIZABLE";
    case Decision::not_smoothly_asy_stabilizable: return "NOT_SMOOTHLY_ASY_STABILIZABLE";
    case Decision::inconclusive: return "INCONCLUSIVE";
  }
  return "INCONCLUSIVE";
}

inline bool is_positive(Decision d) {
  return d == Decision::exp_stabilizable_cont_feedback ||
         d == Decision::asy_stabilizable_cont_feedback;
}

enum class Tribool { no, yes, unknown };

inline std::string_view to_string(Tribool t) {
  switch (t) {
    case Tribool::yes: return "true";
    case Tribool::no: return "false";
    default: return "unknown";
  }
}

struct Evidence {
  std::string name;
  ExtendedReal value = ExtendedReal::of(0.0);
  friend bool operator==(const Evidence&, const Evidence&) = default;
};

/// One evaluated rule. `fired` rules contribute to the decision; the others
/// are kept so a report can show which hypothesis failed and by how much.
struct RuleCheck {
  std::string id;
  std::string citation;
  bool fired = false;
  Decision conclusion = Decision::inconclusive;
  std::vector<Evidence> evidence;
  std::string detail;
  friend bool operator==(const RuleCheck&, const RuleCheck&) = default;
};

struct VerdictFlags {
  Tribool small_time_locally_controllable = Tribool::unknown;
  bool linearized_controllable = false;
  friend bool operator==(const VerdictFlags&, const VerdictFlags&) = default;
};

struct Verdict {
  Decision decision = Decision::inconclusive;
  std::string deciding_rule;
  std::vector<RuleCheck> fired_rules;
  std::vector<RuleCheck> checks;
  VerdictFlags flags;
  std::vector<std::string> warnings;
  std::vector<std::string> notes;
  friend bool operator==(const Verdict&, const Verdict&) = default;
};

struct AnalysisOptions {
  double rank_relative = kDefaultRankRelative;
  double tol_class = kDefaultClassTolerance;
  double margin = 0.0;
  bool assume_bounded_perturbation = false;
  double singularity_radius = 0.05;
  double span_radius = 0.1;
};

/// Below this gap between cov and the spectral threshold a warning is raised.
inline constexpr double kNoMarginWarning = 1e-8;

struct RuleCitation {
  std::string_view id;
  std::string_view text;
};

/// Fixed citation table keyed by rule id.
inline constexpr std::array<RuleCitation, 10> kRuleCitations{{
    {"R1", "linear-openness sufficiency: real nonnegative spectrum and cov f(0,0) > kappa > eta_c "
           "give local exponential stabilization by continuous stationary feedback"},
    {"R2", "zero nonnegative spectrum: Lambda_+(A) = {0} and linear openness give local "
           "exponential stabilization by continuous stationary feedback"},
    {"R3", "full real spectrum: Lambda(A) real and cov f(0,0) > max |lambda| give local "
           "exponential stabilization and small-time local controllability"},
    {"R4", "linear-openness necessity: exponential stabilization by C1 stationary feedback "
           "requires rank [A | B] = n"},
    {"R5", "Brockett-type necessity: with no imaginary-axis eigenvalues, asymptotic stabilization "
           "by C1 stationary feedback requires linear openness"},
    {"R6", "control-affine span: span{g0,...,gm} of dimension d < n rules out C1 stationary "
           "stabilizing feedback"},
    {"R7", "driftless system with independent gi(0): C1 exponential stabilization holds if and "
           "only if m = n"},
    {"D1", "discrete linear-openness sufficiency: real unstable spectrum and cov f(0,0) > kappa "
           "> eta_d give local asymptotic stabilization by continuous stationary feedback"},
    {"D2", "discrete full real spectrum: Lambda(A) real and cov f(0,0) > max |lambda| give local "
           "asymptotic stabilization by continuous stationary feedback"},
    {"D3", "discrete nilpotent linearization: Lambda(A) = {0} and linear openness give local "
           "asymptotic stabilization by continuous stationary feedback"},
}};

inline std::string_view rule_citation(std::string_view id) {
  for (const auto& c : kRuleCitations) {
    if (c.id == id) return c.text;
  }
  throw std::out_of_range("unknown rule id: " + std::string(id));
}

/// cov minus the spectral threshold, with the threshold floored at zero since
/// the covering witness kappa must be positive.
inline double perturbation_margin(double cov, const SpectralProfile& profile) {
  const ExtendedReal& eta = profile.mode == Mode::continuous ? profile.eta : profile.eta_modulus;
  return cov - std::max(eta.as_double(), 0.0);
}

/// Degree of the expression as a polynomial in all variables; +inf when it is
/// not polynomial.
inline double polynomial_degree(const Node& n) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  switch (n.kind) {
    case NodeKind::constant: return 0.0;
    case NodeKind::state:
    case NodeKind::control: return 1.0;
    case NodeKind::neg: return polynomial_degree(*n.children[0]);
    case NodeKind::add:
    case NodeKind::sub:
      return std::max(polynomial_degree(*n.children[0]), polynomial_degree(*n.children[1]));
    case NodeKind::mul:
      return polynomial_degree(*n.children[0]) + polynomial_degree(*n.children[1]);
    case NodeKind::div:
      return polynomial_degree(*n.children[1]) == 0.0 ? polynomial_degree(*n.children[0]) : inf;
    case NodeKind::pow: {
      double d = polynomial_degree(*n.children[0]);
      double p = exponent_of(n);
      if (d == 0.0) return 0.0;
      return p == std::floor(p) ? d * p : inf;
    }
    case NodeKind::func: return polynomial_degree(*n.children[0]) == 0.0 ? 0.0 : inf;
  }
  return inf;
}

inline bool is_affine_system(const SystemSpec& system) {
  return std::all_of(system.components().begin(), system.components().end(),
                     [](const Expr& e) { return polynomial_degree(*e) <= 1.0; });
}

/// Every intermediate quantity of one analysis run.
struct Analysis {
  Linearization lin;
  OpennessReport openness;
  SpectralProfile profile;
  HautusResult hautus;
  bool hautus_full = false;
  int kalman_rank = 0;
  std::optional<ControlAffineForm> affine;
  std::optional<int> span_dimension;
  double margin = 0.0;
  Verdict verdict;
};

namespace detail {

inline std::string fmt(double v) {
  std::ostringstream os;
  os.precision(12);
  os << v;
  return os.str();
}

/// a > b + margin, with ties at rounding level treated as equality.
inline bool strictly_exceeds(double a, double b, double margin) {
  if (std::isinf(b)) return b < 0;
  double tie = 64.0 * std::numeric_limits<double>::epsilon() *
               std::max({1.0, std::abs(a), std::abs(b)});
  return a - b > margin + tie;
}

inline RuleCheck make_check(std::string_view id) {
  RuleCheck c;
  c.id = std::string(id);
  c.citation = std::string(rule_citation(id));
  return c;
}

inline bool driftless(const ControlAffineForm& form, const Vector& center, double radius) {
  const Eigen::Index n = center.size();
  for (std::size_t k = 0; k < 64; ++k) {
    Vector x = k == 0 ? center : Vector(center + radius * sampling::ball_point(k, n));
    try {
      if (!form.field_at(0, x).isZero(0.0)) return false;
    } catch (const EvalError&) {
      return false;
    }
  }
  return true;
}

inline void finalize(Verdict& v, const std::vector<std::string_view>& positive_order,
                     const std::vector<std::string_view>& negative_order) {
  for (const auto& c : v.checks) {
    if (c.fired) v.fired_rules.push_back(c);
  }
  auto find_fired = [&](std::string_view id) -> const RuleCheck* {
    for (const auto& c : v.fired_rules) {
      if (c.id == id) return &c;
    }
    return nullptr;
  };
  for (auto id : positive_order) {
    if (const auto* c = find_fired(id); c && is_positive(c->conclusion)) {
      v.decision = c->conclusion;
      v.deciding_rule = c->id;
      break;
    }
  }
  const RuleCheck* strongest = nullptr;
  for (auto id : negative_order) {
    const auto* c = find_fired(id);
    if (!c || is_positive(c->conclusion)) continue;
    if (!strongest || (c->conclusion == Decision::not_smoothly_asy_stabilizable &&
                       strongest->conclusion != Decision::not_smoothly_asy_stabilizable)) {
      strongest = c;
    }
  }
  if (v.deciding_rule.empty() && strongest) {
    v.decision = strongest->conclusion;
    v.deciding_rule = strongest->id;
  } else if (!v.deciding_rule.empty() && strongest) {
    v.warnings.push_back("sufficient rule " + v.deciding_rule + " and necessary rule " +
                         strongest->id + " disagree; numerical tolerances may be too loose");
  }
}

inline void common_warnings(Analysis& a, const SystemSpec& system, const AnalysisOptions& opts) {
  for (const auto& w : a.profile.boundary_warnings) a.verdict.warnings.push_back(w);
  for (const auto& lambda : a.hautus.failures) {
    a.verdict.warnings.push_back("Hautus fails at λ=" + format_complex(lambda) +
                                 "; linearization not stabilizable");
  }
  for (const auto& w : singularity_warnings(system, opts.singularity_radius)) {
    a.verdict.warnings.push_back(w);
  }
}

inline Analysis prepare(const SystemSpec& system, const AnalysisOptions& opts) {
  Analysis a;
  a.lin = jacobian(system);
  a.openness = openness_report(a.lin, opts.rank_relative);
  a.profile = spectral_profile(a.lin.A, system.mode(), opts.tol_class);
  a.hautus = hautus_asymptotic(a.lin.A, a.lin.B, a.profile, opts.rank_relative);
  a.kalman_rank = kalman_controllability_rank(a.lin.A, a.lin.B, opts.rank_relative);
  a.hautus_full = hautus_full_spectrum(a.lin.A, a.lin.B, opts.rank_relative);
  a.margin = perturbation_margin(a.openness.cov_bound, a.profile);
  a.verdict.flags.linearized_controllable = a.hautus_full;
  return a;
}

}  // namespace detail

/// Continuous-time rule cascade. Positive rules are tried most specific first
/// (R2, R1, R3, R7); all rules are evaluated and recorded.
inline Analysis analyze_continuous_full(const SystemSpec& system, const AnalysisOptions& opts = {}) {
  if (system.mode() != Mode::continuous) throw PreconditionError("analyze_continuous: system is discrete");
  using detail::fmt;
  Analysis a = detail::prepare(system, opts);
  Verdict& v = a.verdict;
  const auto n = system.n();
  const double cov = a.openness.cov_bound;
  const bool open = a.openness.linearly_open;
  const ExtendedReal eta = a.profile.eta;
  const double eta_floor = std::max(eta.as_double(), 0.0);

  {
    auto c = detail::make_check("R2");
    bool zero_only = !a.profile.unstable_set.empty() &&
                     std::all_of(a.profile.unstable_set.begin(), a.profile.unstable_set.end(),
                                 [&](ComplexValue l) { return std::abs(l) <= opts.tol_class; });
    c.evidence = {{"cov", ExtendedReal::of(cov)},
                  {"unstable_count", ExtendedReal::of(static_cast<double>(a.profile.unstable_set.size()))}};
    c.fired = zero_only && open;
    c.conclusion = Decision::exp_stabilizable_cont_feedback;
    c.detail = zero_only ? (open ? "Lambda_+(A) = {0} and f is linearly open" : "Lambda_+(A) = {0} but f is not linearly open")
                         : "Lambda_+(A) is not {0}";
    v.checks.push_back(c);
  }
  {
    auto c = detail::make_check("R1");
    c.evidence = {{"cov", ExtendedReal::of(cov)},
                  {"eta_c", eta},
                  {"kappa", ExtendedReal::of(0.5 * (eta_floor + cov))},
                  {"margin", ExtendedReal::of(cov - eta_floor)}};
    const bool exceeds = detail::strictly_exceeds(cov, eta_floor, opts.margin);
    c.fired = a.profile.unstable_real_only && open && exceeds;
    c.conclusion = Decision::exp_stabilizable_cont_feedback;
    if (!a.profile.unstable_real_only) {
      c.detail = "nonreal eigenvalues in Lambda_+(A); condition (C) inapplicable";
      v.warnings.push_back("nonreal eigenvalues with nonnegative real part: the real-spectrum sufficiency rule does not apply");
    } else if (!open) {
      c.detail = "f is not linearly open";
    } else if (!exceeds) {
      c.detail = "cov = " + fmt(cov) + " does not exceed eta_c = " + fmt(eta_floor) + " by margin " + fmt(opts.margin);
    } else {
      c.detail = "cov = " + fmt(cov) + " > eta_c = " + fmt(eta_floor);
    }
    if (open && eta.is_finite() && cov - eta_floor < kNoMarginWarning) {
      v.warnings.push_back("no margin: cov - eta_c = " + fmt(cov - eta_floor) + " is below 1e-8");
    }
    v.checks.push_back(c);
  }
  {
    auto c = detail::make_check("R3");
    c.evidence = {{"cov", ExtendedReal::of(cov)}, {"eta_tilde_c", ExtendedReal::of(a.profile.eta_tilde)}};
    const bool exceeds = detail::strictly_exceeds(cov, a.profile.eta_tilde, opts.margin);
    c.fired = a.profile.spectrum_real && open && exceeds && cov > 0.0;
    c.conclusion = Decision::exp_stabilizable_cont_feedback;
    c.detail = !a.profile.spectrum_real ? "Lambda(A) is not real"
               : !open                  ? "f is not linearly open"
               : !exceeds ? "cov = " + fmt(cov) + " does not exceed max |lambda| = " + fmt(a.profile.eta_tilde)
                          : "cov = " + fmt(cov) + " > max |lambda| = " + fmt(a.profile.eta_tilde);
    v.checks.push_back(c);
    if (c.fired) v.flags.small_time_locally_controllable = Tribool::yes;
  }
  if (a.hautus_full) v.flags.small_time_locally_controllable = Tribool::yes;

  {
    auto c = detail::make_check("R4");
    c.evidence = {{"jacobian_rank", ExtendedReal::of(a.openness.jacobian_rank)},
                  {"n", ExtendedReal::of(n)}};
    c.fired = !open;
    c.conclusion = Decision::not_smoothly_exp_stabilizable;
    c.detail = open ? "rank [A | B] = n" : "rank [A | B] < n";
    v.checks.push_back(c);
  }
  const bool no_imaginary_axis =
      std::none_of(a.profile.unstable_set.begin(), a.profile.unstable_set.end(),
                   [&](ComplexValue l) { return std::abs(l.real()) <= opts.tol_class; });
  {
    auto c = detail::make_check("R5");
    c.evidence = {{"jacobian_rank", ExtendedReal::of(a.openness.jacobian_rank)},
                  {"n", ExtendedReal::of(n)}};
    c.fired = !open && no_imaginary_axis;
    c.conclusion = Decision::not_smoothly_asy_stabilizable;
    c.detail = open ? "f is linearly open"
               : no_imaginary_axis ? "rank [A | B] < n and Lambda_+(A) has no imaginary-axis eigenvalue"
                                   : "Lambda_+(A) meets the imaginary axis";
    v.checks.push_back(c);
  }

  a.affine = detect_control_affine(system);
  {
    auto c = detail::make_check("R6");
    if (a.affine) {
      a.span_dimension = span_dimension_estimate(*a.affine, system.equilibrium_x(), opts.span_radius,
                                                 static_cast<std::size_t>(std::max(8, 4 * n)));
      c.evidence = {{"span_dimension", ExtendedReal::of(*a.span_dimension)}, {"n", ExtendedReal::of(n)}};
      c.fired = *a.span_dimension < n;
      c.conclusion = no_imaginary_axis ? Decision::not_smoothly_asy_stabilizable
                                       : Decision::not_smoothly_exp_stabilizable;
      c.detail = "control-affine with estimated span dimension " + std::to_string(*a.span_dimension);
    } else {
      c.detail = "f is not control-affine";
    }
    v.checks.push_back(c);
  }
  {
    auto c = detail::make_check("R7");
    if (a.affine && detail::driftless(*a.affine, system.equilibrium_x(), opts.span_radius)) {
      Matrix G(n, system.m());
      for (int i = 0; i < system.m(); ++i) {
        G.col(i) = a.affine->field_at(static_cast<std::size_t>(i) + 1, system.equilibrium_x());
      }
      const int rank = G.isZero(0.0) ? 0 : numerical_rank(G, rank_tolerance(G, opts.rank_relative));
      c.evidence = {{"input_rank", ExtendedReal::of(rank)},
                    {"m", ExtendedReal::of(system.m())},
                    {"n", ExtendedReal::of(n)}};
      if (rank == system.m()) {
        c.fired = true;
        c.conclusion = system.m() == n ? Decision::exp_stabilizable_cont_feedback
                                       : Decision::not_smoothly_exp_stabilizable;
        c.detail = "driftless with independent input fields at the equilibrium, m " +
                   std::string(system.m() == n ? "=" : "!=") + " n";
      } else {
        c.detail = "driftless but the input fields are dependent at the equilibrium";
        v.warnings.push_back("driftless system with dependent input fields at the equilibrium: the m = n criterion does not apply");
      }
    } else {
      c.detail = "system has drift";
    }
    v.checks.push_back(c);
  }

  detail::common_warnings(a, system, opts);
  detail::finalize(v, {"R2", "R1", "R3", "R7"}, {"R5", "R6", "R4", "R7"});

  if (is_positive(v.decision) && !a.hautus.holds) {
    v.warnings.push_back("positive verdict while the Hautus test fails; check the rank and class tolerances");
  }
  if (is_positive(v.decision)) {
    v.notes.push_back("robustness margin cov - eta = " + fmt(a.margin) +
                      ": the verdict persists under C1 perturbations g with g(0,0) = 0 and vanishing Jacobian");
    v.notes.push_back("sign convention for synthesized gains: u = u* + K (x - x*)");
  }
  if (opts.assume_bounded_perturbation && is_affine_system(system) && a.profile.spectrum_real && open) {
    double max_lambda = -std::numeric_limits<double>::infinity();
    for (const auto& l : a.profile.eigenvalues) max_lambda = std::max(max_lambda, l.real());
    if (detail::strictly_exceeds(cov, std::max(max_lambda, 0.0), opts.margin)) {
      v.notes.push_back("informational: with a bounded C1 perturbation g(x), x' = Ax + Bu + g(x) is globally "
                        "controllable in any fixed time T > 0 (boundedness asserted by the user, not verified)");
    }
  }
  return a;
}

/// Discrete-time cascade (D3, D1, D2). No necessary conditions exist for this
/// setting, so negative decisions are never issued.
inline Analysis analyze_discrete_full(const SystemSpec& system, const AnalysisOptions& opts = {}) {
  if (system.mode() != Mode::discrete) throw PreconditionError("analyze_discrete: system is continuous");
  using detail::fmt;
  Analysis a = detail::prepare(system, opts);
  Verdict& v = a.verdict;
  const double cov = a.openness.cov_bound;
  const bool open = a.openness.linearly_open;
  const double threshold = std::max(a.profile.eta_modulus.as_double(), 0.0);

  {
    auto c = detail::make_check("D3");
    bool nilpotent = std::all_of(a.profile.eigenvalues.begin(), a.profile.eigenvalues.end(),
                                 [&](ComplexValue l) { return std::abs(l) <= opts.tol_class; });
    c.evidence = {{"cov", ExtendedReal::of(cov)}, {"eta_tilde_d", ExtendedReal::of(a.profile.eta_tilde)}};
    c.fired = nilpotent && open;
    c.conclusion = Decision::asy_stabilizable_cont_feedback;
    c.detail = !nilpotent ? "Lambda(A) is not {0}" : open ? "Lambda(A) = {0} and f is linearly open"
                                                          : "f is not linearly open";
    v.checks.push_back(c);
  }
  {
    auto c = detail::make_check("D1");
    c.evidence = {{"cov", ExtendedReal::of(cov)},
                  {"eta_d", a.profile.eta},
                  {"eta_d_modulus", a.profile.eta_modulus},
                  {"kappa", ExtendedReal::of(0.5 * (threshold + cov))},
                  {"margin", ExtendedReal::of(cov - threshold)}};
    const bool exceeds = detail::strictly_exceeds(cov, threshold, opts.margin);
    c.fired = a.profile.unstable_real_only && open && exceeds;
    c.conclusion = Decision::asy_stabilizable_cont_feedback;
    if (!a.profile.unstable_real_only) {
      c.detail = "nonreal eigenvalues in Lambda_1(A); condition (D) inapplicable";
      v.warnings.push_back("nonreal eigenvalues on or outside the unit circle: the real-spectrum sufficiency rule does not apply");
    } else if (!open) {
      c.detail = "f is not linearly open";
    } else if (!exceeds) {
      c.detail = "cov = " + fmt(cov) + " does not exceed eta_d = " + fmt(threshold) + " by margin " + fmt(opts.margin);
    } else {
      c.detail = "cov = " + fmt(cov) + " > eta_d = " + fmt(threshold);
    }
    if (open && a.profile.eta_modulus.is_finite() && cov - threshold < kNoMarginWarning) {
      v.warnings.push_back("no margin: cov - eta_d = " + fmt(cov - threshold) + " is below 1e-8");
    }
    v.checks.push_back(c);
  }
  {
    auto c = detail::make_check("D2");
    c.evidence = {{"cov", ExtendedReal::of(cov)}, {"eta_tilde_d", ExtendedReal::of(a.profile.eta_tilde)}};
    const bool exceeds = detail::strictly_exceeds(cov, a.profile.eta_tilde, opts.margin);
    c.fired = a.profile.spectrum_real && open && exceeds && cov > 0.0;
    c.conclusion = Decision::asy_stabilizable_cont_feedback;
    c.detail = !a.profile.spectrum_real ? "Lambda(A) is not real"
               : !open                  ? "f is not linearly open"
               : !exceeds ? "cov = " + fmt(cov) + " does not exceed max |lambda| = " + fmt(a.profile.eta_tilde)
                          : "cov = " + fmt(cov) + " > max |lambda| = " + fmt(a.profile.eta_tilde);
    v.checks.push_back(c);
  }
  a.affine = detect_control_affine(system);

  detail::common_warnings(a, system, opts);
  detail::finalize(v, {"D3", "D1", "D2"}, {});
  v.notes.push_back("no necessary conditions are available for discrete-time systems; negative verdicts are not issued");
  if (is_positive(v.decision) && !a.hautus.holds) {
    v.warnings.push_back("positive verdict while the Hautus test fails; check the rank and class tolerances");
  }
  if (is_positive(v.decision)) {
    v.notes.push_back("robustness margin cov - eta = " + fmt(a.margin) +
                      ": the verdict persists under C1 perturbations g with g(0,0) = 0 and vanishing Jacobian");
    v.notes.push_back("sign convention for synthesized gains: u = u* + K (x - x*)");
  }
  return a;
}

inline Analysis analyze_full(const SystemSpec& system, const AnalysisOptions& opts = {}) {
  return system.mode() == Mode::continuous ? analyze_continuous_full(system, opts)
                                           : analyze_discrete_full(system, opts);
}

inline Verdict analyze_continuous(const SystemSpec& system, const AnalysisOptions& opts = {}) {
  return analyze_continuous_full(system, opts).verdict;
}

inline Verdict analyze_discrete(const SystemSpec& system, const AnalysisOptions& opts = {}) {
  return analyze_discrete_full(system, opts).verdict;
}

}  // namespace linopen
