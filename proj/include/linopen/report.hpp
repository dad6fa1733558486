#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "linopen/hautus.hpp"
#include "linopen/openness.hpp"
#include "linopen/sim.hpp"
#include "linopen/synthesis.hpp"
#include "linopen/system.hpp"
#include "linopen/verdict.hpp"

#ifndef LINOPEN_VERSION
#define LINOPEN_VERSION "1.0.0"
#endif

namespace linopen {

using Json = nlohmann::ordered_json;
using Rows = std::vector<std::vector<double>>;

struct SystemEcho {
  Mode mode = Mode::continuous;
  int n = 0;
  int m = 0;
  std::vector<double> eq_x;
  std::vector<double> eq_u;
  std::vector<std::string> components;
  friend bool operator==(const SystemEcho&, const SystemEcho&) = default;
};

struct HautusSummary {
  bool asymptotic_holds = true;
  std::vector<ComplexValue> failures;
  bool full_spectrum_holds = false;
  int kalman_rank = 0;
  friend bool operator==(const HautusSummary&, const HautusSummary&) = default;
};

struct GainSummary {
  Rows K;
  std::vector<ComplexValue> target_poles;
  std::vector<ComplexValue> achieved_poles;
  int controllable_dim = 0;
  std::vector<std::string> expressions;
  std::string convention = "u = u* + K (x - x*)";
  friend bool operator==(const GainSummary&, const GainSummary&) = default;
};

struct ValidationSummary {
  bool pass = false;
  double delta = 0.0;
  int samples = 0;
  DecayFit worst;
  Rows failures;
  std::string status = "empirically certified";
  friend bool operator==(const ValidationSummary&, const ValidationSummary&) = default;
};

struct ReportDocument {
  std::string version = LINOPEN_VERSION;
  std::uint64_t seed = 0;
  SystemEcho system;
  Rows A;
  Rows B;
  OpennessReport openness;
  SpectralProfile profile;
  HautusSummary hautus;
  bool control_affine = false;
  std::optional<int> span_dimension;
  double perturbation_margin = 0.0;
  Verdict verdict;
  std::optional<GainSummary> gain;
  std::optional<ValidationSummary> validation;
  friend bool operator==(const ReportDocument&, const ReportDocument&) = default;
};

inline Rows to_rows(const Matrix& M) {
  Rows r(static_cast<std::size_t>(M.rows()), std::vector<double>(static_cast<std::size_t>(M.cols())));
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    for (Eigen::Index j = 0; j < M.cols(); ++j) r[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = M(i, j);
  }
  return r;
}

inline std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

inline ReportDocument make_report(const SystemSpec& system, const Analysis& a, std::uint64_t seed) {
  ReportDocument d;
  d.seed = seed;
  d.system.mode = system.mode();
  d.system.n = system.n();
  d.system.m = system.m();
  d.system.eq_x = to_std(system.equilibrium_x());
  d.system.eq_u = to_std(system.equilibrium_u());
  for (const auto& c : system.components()) d.system.components.push_back(unparse(c));
  d.A = to_rows(a.lin.A);
  d.B = to_rows(a.lin.B);
  d.openness = a.openness;
  d.profile = a.profile;
  d.hautus = {a.hautus.holds, a.hautus.failures, a.hautus_full, a.kalman_rank};
  d.control_affine = a.affine.has_value();
  d.span_dimension = a.span_dimension;
  d.perturbation_margin = a.margin;
  d.verdict = a.verdict;
  return d;
}

inline GainSummary summarize_gain(const SystemSpec& system, const FeedbackGain& g) {
  GainSummary s;
  s.K = to_rows(g.K);
  s.target_poles = g.target_poles;
  s.achieved_poles = g.achieved_poles;
  s.controllable_dim = g.controllable_dim;
  s.expressions = gain_expressions(g.K, system.equilibrium_x(), system.equilibrium_u());
  return s;
}

inline ValidationSummary summarize_validation(const StabilityCheck& c) {
  ValidationSummary s;
  s.pass = c.pass;
  s.delta = c.delta;
  s.samples = c.samples;
  s.worst = c.worst;
  for (const auto& x : c.failures) s.failures.push_back(to_std(x));
  return s;
}

// Serialization. Non-finite reals are written as the strings "inf", "-inf"
// and "nan" so that every document is plain JSON.
namespace detail {

inline Json real_to_json(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

inline double real_from_json(const Json& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    throw ValidationError("report: bad real \"" + s + "\"");
  }
  return j.get<double>();
}

inline Json extended_to_json(const ExtendedReal& v) { return real_to_json(v.as_double()); }

inline ExtendedReal extended_from_json(const Json& j) {
  double v = real_from_json(j);
  if (std::isinf(v)) return v > 0 ? ExtendedReal::plus_infinity() : ExtendedReal::minus_infinity();
  return ExtendedReal::of(v);
}

inline Json reals_to_json(const std::vector<double>& v) {
  Json out = Json::array();
  for (double x : v) out.push_back(real_to_json(x));
  return out;
}

inline std::vector<double> reals_from_json(const Json& j) {
  std::vector<double> out;
  for (const auto& x : j) out.push_back(real_from_json(x));
  return out;
}

inline Json rows_to_json(const Rows& r) {
  Json out = Json::array();
  for (const auto& row : r) out.push_back(reals_to_json(row));
  return out;
}

inline Rows rows_from_json(const Json& j) {
  Rows out;
  for (const auto& row : j) out.push_back(reals_from_json(row));
  return out;
}

inline Json complex_list_to_json(const std::vector<ComplexValue>& v) {
  Json out = Json::array();
  for (const auto& z : v) out.push_back(Json::array({real_to_json(z.real()), real_to_json(z.imag())}));
  return out;
}

inline std::vector<ComplexValue> complex_list_from_json(const Json& j) {
  std::vector<ComplexValue> out;
  for (const auto& z : j) out.emplace_back(real_from_json(z.at(0)), real_from_json(z.at(1)));
  return out;
}

inline Decision decision_from_string(const std::string& s) {
  for (auto d : {Decision::exp_stabilizable_cont_feedback, Decision::asy_stabilizable_cont_feedback,
                 Decision::not_smoothly_exp_stabilizable, Decision::not_smoothly_asy_stabilizable,
                 Decision::inconclusive}) {
    if (to_string(d) == s) return d;
  }
  throw ValidationError("report: unknown decision " + s);
}

inline Mode mode_from_string(const std::string& s) {
  if (s == "continuous") return Mode::continuous;
  if (s == "discrete") return Mode::discrete;
  throw ValidationError("report: unknown mode " + s);
}

inline Json rule_to_json(const RuleCheck& c) {
  Json ev = Json::object();
  for (const auto& e : c.evidence) ev[e.name] = extended_to_json(e.value);
  return {{"id", c.id},       {"fired", c.fired},  {"conclusion", to_string(c.conclusion)},
          {"evidence", ev},   {"detail", c.detail}, {"citation", c.citation}};
}

inline RuleCheck rule_from_json(const Json& j) {
  RuleCheck c;
  c.id = j.at("id").get<std::string>();
  c.fired = j.at("fired").get<bool>();
  c.conclusion = decision_from_string(j.at("conclusion").get<std::string>());
  for (const auto& [k, v] : j.at("evidence").items()) c.evidence.push_back({k, extended_from_json(v)});
  c.detail = j.at("detail").get<std::string>();
  c.citation = j.at("citation").get<std::string>();
  return c;
}

inline Json tribool_to_json(Tribool t) {
  if (t == Tribool::unknown) return "unknown";
  return t == Tribool::yes;
}

inline Tribool tribool_from_json(const Json& j) {
  if (j.is_string()) return Tribool::unknown;
  return j.get<bool>() ? Tribool::yes : Tribool::no;
}

inline Json fit_to_json(const DecayFit& f) {
  return {{"M_hat", real_to_json(f.M_hat)},
          {"alpha_hat", real_to_json(f.alpha_hat)},
          {"residual", real_to_json(f.residual)},
          {"certified", f.certified}};
}

inline DecayFit fit_from_json(const Json& j) {
  DecayFit f;
  f.M_hat = real_from_json(j.at("M_hat"));
  f.alpha_hat = real_from_json(j.at("alpha_hat"));
  f.residual = real_from_json(j.at("residual"));
  f.certified = j.at("certified").get<bool>();
  return f;
}

}  // namespace detail

inline Json to_json(const ReportDocument& d) {
  using namespace detail;
  Json j;
  j["tool"] = "linopen";
  j["version"] = d.version;
  j["seed"] = d.seed;
  j["system"] = {{"mode", to_string(d.system.mode)},
                 {"states", d.system.n},
                 {"controls", d.system.m},
                 {"eq_x", reals_to_json(d.system.eq_x)},
                 {"eq_u", reals_to_json(d.system.eq_u)},
                 {"f", d.system.components}};
  j["linearization"] = {{"A", rows_to_json(d.A)}, {"B", rows_to_json(d.B)}};
  j["openness"] = {{"cov", real_to_json(d.openness.cov_bound)},
                   {"reg", extended_to_json(d.openness.reg_bound)},
                   {"lip", real_to_json(d.openness.lip_bound)},
                   {"jacobian_rank", d.openness.jacobian_rank},
                   {"linearly_open", d.openness.linearly_open},
                   {"singular_values", reals_to_json(d.openness.singular_values)}};
  j["spectrum"] = {{"mode", to_string(d.profile.mode)},
                   {"eigenvalues", complex_list_to_json(d.profile.eigenvalues)},
                   {"unstable_set", complex_list_to_json(d.profile.unstable_set)},
                   {"unstable_real_only", d.profile.unstable_real_only},
                   {"spectrum_real", d.profile.spectrum_real},
                   {"eta", extended_to_json(d.profile.eta)},
                   {"eta_modulus", extended_to_json(d.profile.eta_modulus)},
                   {"eta_tilde", real_to_json(d.profile.eta_tilde)},
                   {"boundary_warnings", d.profile.boundary_warnings}};
  j["hautus"] = {{"asymptotic_holds", d.hautus.asymptotic_holds},
                 {"failures", complex_list_to_json(d.hautus.failures)},
                 {"full_spectrum_holds", d.hautus.full_spectrum_holds},
                 {"kalman_rank", d.hautus.kalman_rank}};
  j["control_affine"] = {{"detected", d.control_affine},
                         {"span_dimension", d.span_dimension ? Json(*d.span_dimension) : Json(nullptr)}};
  j["perturbation_margin"] = real_to_json(d.perturbation_margin);

  Json fired = Json::array();
  for (const auto& c : d.verdict.fired_rules) fired.push_back(rule_to_json(c));
  Json checks = Json::array();
  for (const auto& c : d.verdict.checks) checks.push_back(rule_to_json(c));
  j["verdict"] = {{"decision", to_string(d.verdict.decision)},
                  {"deciding_rule", d.verdict.deciding_rule},
                  {"fired_rules", fired},
                  {"checks", checks},
                  {"flags",
                   {{"small_time_locally_controllable", tribool_to_json(d.verdict.flags.small_time_locally_controllable)},
                    {"linearized_controllable", d.verdict.flags.linearized_controllable}}},
                  {"warnings", d.verdict.warnings},
                  {"notes", d.verdict.notes}};
  if (d.gain) {
    j["gain"] = {{"K", rows_to_json(d.gain->K)},
                 {"target_poles", complex_list_to_json(d.gain->target_poles)},
                 {"achieved_poles", complex_list_to_json(d.gain->achieved_poles)},
                 {"controllable_dim", d.gain->controllable_dim},
                 {"expressions", d.gain->expressions},
                 {"convention", d.gain->convention}};
  }
  if (d.validation) {
    j["validation"] = {{"pass", d.validation->pass},
                       {"status", d.validation->status},
                       {"delta", real_to_json(d.validation->delta)},
                       {"samples", d.validation->samples},
                       {"worst", fit_to_json(d.validation->worst)},
                       {"failures", rows_to_json(d.validation->failures)}};
  }
  return j;
}

inline ReportDocument report_from_json(const Json& j) {
  using namespace detail;
  ReportDocument d;
  d.version = j.at("version").get<std::string>();
  d.seed = j.at("seed").get<std::uint64_t>();
  const auto& s = j.at("system");
  d.system.mode = mode_from_string(s.at("mode").get<std::string>());
  d.system.n = s.at("states").get<int>();
  d.system.m = s.at("controls").get<int>();
  d.system.eq_x = reals_from_json(s.at("eq_x"));
  d.system.eq_u = reals_from_json(s.at("eq_u"));
  d.system.components = s.at("f").get<std::vector<std::string>>();
  d.A = rows_from_json(j.at("linearization").at("A"));
  d.B = rows_from_json(j.at("linearization").at("B"));
  const auto& o = j.at("openness");
  d.openness.cov_bound = real_from_json(o.at("cov"));
  d.openness.reg_bound = extended_from_json(o.at("reg"));
  d.openness.lip_bound = real_from_json(o.at("lip"));
  d.openness.jacobian_rank = o.at("jacobian_rank").get<int>();
  d.openness.linearly_open = o.at("linearly_open").get<bool>();
  d.openness.singular_values = reals_from_json(o.at("singular_values"));
  const auto& p = j.at("spectrum");
  d.profile.mode = mode_from_string(p.at("mode").get<std::string>());
  d.profile.eigenvalues = complex_list_from_json(p.at("eigenvalues"));
  d.profile.unstable_set = complex_list_from_json(p.at("unstable_set"));
  d.profile.unstable_real_only = p.at("unstable_real_only").get<bool>();
  d.profile.spectrum_real = p.at("spectrum_real").get<bool>();
  d.profile.eta = extended_from_json(p.at("eta"));
  d.profile.eta_modulus = extended_from_json(p.at("eta_modulus"));
  d.profile.eta_tilde = real_from_json(p.at("eta_tilde"));
  d.profile.boundary_warnings = p.at("boundary_warnings").get<std::vector<std::string>>();
  const auto& h = j.at("hautus");
  d.hautus.asymptotic_holds = h.at("asymptotic_holds").get<bool>();
  d.hautus.failures = complex_list_from_json(h.at("failures"));
  d.hautus.full_spectrum_holds = h.at("full_spectrum_holds").get<bool>();
  d.hautus.kalman_rank = h.at("kalman_rank").get<int>();
  const auto& ca = j.at("control_affine");
  d.control_affine = ca.at("detected").get<bool>();
  if (!ca.at("span_dimension").is_null()) d.span_dimension = ca.at("span_dimension").get<int>();
  d.perturbation_margin = real_from_json(j.at("perturbation_margin"));
  const auto& v = j.at("verdict");
  d.verdict.decision = decision_from_string(v.at("decision").get<std::string>());
  d.verdict.deciding_rule = v.at("deciding_rule").get<std::string>();
  for (const auto& c : v.at("fired_rules")) d.verdict.fired_rules.push_back(rule_from_json(c));
  for (const auto& c : v.at("checks")) d.verdict.checks.push_back(rule_from_json(c));
  d.verdict.flags.small_time_locally_controllable =
      tribool_from_json(v.at("flags").at("small_time_locally_controllable"));
  d.verdict.flags.linearized_controllable = v.at("flags").at("linearized_controllable").get<bool>();
  d.verdict.warnings = v.at("warnings").get<std::vector<std::string>>();
  d.verdict.notes = v.at("notes").get<std::vector<std::string>>();
  if (j.contains("gain")) {
    const auto& g = j.at("gain");
    GainSummary gs;
    gs.K = rows_from_json(g.at("K"));
    gs.target_poles = complex_list_from_json(g.at("target_poles"));
    gs.achieved_poles = complex_list_from_json(g.at("achieved_poles"));
    gs.controllable_dim = g.at("controllable_dim").get<int>();
    gs.expressions = g.at("expressions").get<std::vector<std::string>>();
    gs.convention = g.at("convention").get<std::string>();
    d.gain = gs;
  }
  if (j.contains("validation")) {
    const auto& val = j.at("validation");
    ValidationSummary vs;
    vs.pass = val.at("pass").get<bool>();
    vs.status = val.at("status").get<std::string>();
    vs.delta = real_from_json(val.at("delta"));
    vs.samples = val.at("samples").get<int>();
    vs.worst = fit_from_json(val.at("worst"));
    vs.failures = rows_from_json(val.at("failures"));
    d.validation = vs;
  }
  return d;
}

}  // namespace linopen
