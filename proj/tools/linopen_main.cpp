// linopen: stabilizability analysis, gain synthesis and closed-loop simulation
// for nonlinear control systems described in .stab files.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "linopen/linopen.hpp"

namespace {

using namespace linopen;

constexpr int kExitInput = 2;
constexpr int kExitPrecondition = 3;
constexpr int kExitNumeric = 1;

struct GlobalFlags {
  double tol_rank = kDefaultRankRelative;
  double tol_class = kDefaultClassTolerance;
  double margin = 0.0;
  std::uint64_t seed = 0;
  bool assume_bounded = false;
};

std::string num(double v) {
  std::ostringstream os;
  os.precision(12);
  os << v;
  return os.str();
}

std::string num(const ExtendedReal& v) {
  if (v.kind() == ExtendedReal::Kind::plus_infinity) return "inf";
  if (v.kind() == ExtendedReal::Kind::minus_infinity) return "-inf";
  return num(v.value());
}

std::string vec(const Vector& v) {
  std::string s = "(";
  for (Eigen::Index i = 0; i < v.size(); ++i) s += (i ? ", " : "") + num(v(i));
  return s + ")";
}

std::string mat(const Matrix& M) {
  std::string s = "[";
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    s += i ? "; " : "";
    for (Eigen::Index j = 0; j < M.cols(); ++j) s += (j ? ", " : "") + num(M(i, j));
  }
  return s + "]";
}

std::string complex_list(const std::vector<ComplexValue>& v) {
  if (v.empty()) return "(none)";
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + format_complex(v[i]);
  return s;
}

AnalysisOptions analysis_options(const GlobalFlags& g) {
  AnalysisOptions o;
  o.rank_relative = g.tol_rank;
  o.tol_class = g.tol_class;
  o.margin = g.margin;
  o.assume_bounded_perturbation = g.assume_bounded;
  return o;
}

std::vector<double> parse_reals(const std::string& text) {
  std::vector<double> out;
  std::string token;
  std::stringstream ss(text);
  while (std::getline(ss, token, ',')) {
    std::stringstream words(token);
    std::string w;
    while (words >> w) {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(w, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != w.size()) throw ValidationError("not a number: \"" + w + "\"");
      out.push_back(v);
    }
  }
  return out;
}

/// "a", "a+bi", "a-bi", "bi".
ComplexValue parse_complex(std::string w) {
  if (w.empty()) throw ValidationError("empty pole");
  auto whole = [](const std::string& s) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != s.size() || s.empty()) throw ValidationError("not a pole: \"" + s + "\"");
    return v;
  };
  if (w.back() != 'i' && w.back() != 'j') return {whole(w), 0.0};
  w.pop_back();
  std::size_t split = std::string::npos;
  for (std::size_t k = w.size(); k-- > 1;) {
    if ((w[k] == '+' || w[k] == '-') && w[k - 1] != 'e' && w[k - 1] != 'E') {
      split = k;
      break;
    }
  }
  if (split == std::string::npos) {
    std::string im = w.empty() || w == "+" || w == "-" ? w + "1" : w;
    return {0.0, whole(im)};
  }
  std::string im = w.substr(split);
  if (im == "+" || im == "-") im += "1";
  return {whole(w.substr(0, split)), whole(im)};
}

std::vector<ComplexValue> parse_poles(const std::string& text) {
  std::vector<ComplexValue> out;
  std::stringstream ss(text);
  std::string token;
  while (std::getline(ss, token, ',')) {
    auto t = std::string(detail::trim(token));
    if (!t.empty()) out.push_back(parse_complex(t));
  }
  return out;
}

/// Inline "k11 k12; k21 k22" (commas or spaces), a text file holding the same,
/// or a JSON report with a gain section.
Matrix parse_gain(const std::string& spec, int m, int n) {
  std::string text = spec;
  if (std::ifstream in(spec); in) {
    std::stringstream buf;
    buf << in.rdbuf();
    text = buf.str();
    auto first = text.find_first_not_of(" \t\r\n");
    if (first != std::string::npos && text[first] == '{') {
      Json j = Json::parse(text);
      if (!j.contains("gain")) throw ValidationError("report " + spec + " has no gain section");
      text.clear();
      for (const auto& row : j["gain"]["K"]) {
        for (const auto& v : row) text += num(detail::real_from_json(v)) + " ";
        text += ";";
      }
    }
  }
  std::vector<std::vector<double>> rows;
  std::stringstream ss(text);
  std::string row;
  while (std::getline(ss, row, ';')) {
    for (char& c : row) {
      if (c == '\n') c = ' ';
    }
    if (detail::trim(row).empty()) continue;
    rows.push_back(parse_reals(row));
  }
  if (static_cast<int>(rows.size()) == 1 && m == 1 && static_cast<int>(rows[0].size()) != n) rows.clear();
  if (static_cast<int>(rows.size()) != m) {
    throw ValidationError("gain must have " + std::to_string(m) + " rows of " + std::to_string(n) + " entries");
  }
  Matrix K(m, n);
  for (int i = 0; i < m; ++i) {
    if (static_cast<int>(rows[static_cast<std::size_t>(i)].size()) != n) {
      throw ValidationError("gain must have " + std::to_string(m) + " rows of " + std::to_string(n) + " entries");
    }
    for (int j = 0; j < n; ++j) K(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  }
  return K;
}

void print_analysis(std::ostream& os, const SystemSpec& system, const Analysis& a) {
  const auto& o = a.openness;
  const auto& p = a.profile;
  const auto& v = a.verdict;
  const char* eta_name = system.mode() == Mode::continuous ? "eta_c" : "eta_d";
  os << "system: " << to_string(system.mode()) << ", states " << system.n() << ", controls " << system.m()
     << ", x* = " << vec(system.equilibrium_x()) << ", u* = " << vec(system.equilibrium_u()) << "\n";
  os << "A = " << mat(a.lin.A) << "\n";
  os << "B = " << mat(a.lin.B) << "\n";
  os << "rank [A|B] = " << o.jacobian_rank << (o.linearly_open ? " (linearly open)" : " (not linearly open)")
     << "\n";
  os << "cov = " << num(o.cov_bound) << "  reg = " << num(o.reg_bound) << "  lip = " << num(o.lip_bound) << "\n";
  os << "eigenvalues: " << complex_list(p.eigenvalues) << "\n";
  os << "unstable set: " << complex_list(p.unstable_set) << "\n";
  os << eta_name << " = " << num(p.eta);
  if (system.mode() == Mode::discrete) os << "  sup |lambda| over real unstable = " << num(p.eta_modulus);
  os << "  eta_tilde = " << num(p.eta_tilde) << "  margin = " << num(a.margin) << "\n";
  os << "Hautus (unstable set): " << (a.hautus.holds ? "holds" : "fails") << "  Kalman rank: " << a.kalman_rank
     << "\n";
  if (a.affine) {
    os << "control-affine: yes";
    if (a.span_dimension) os << ", span dimension estimate " << *a.span_dimension;
    os << "\n";
  }
  os << "decision: " << to_string(v.decision);
  if (!v.deciding_rule.empty()) os << " via " << v.deciding_rule;
  os << "\n";
  for (const auto& c : v.checks) {
    os << "  " << c.id << (c.fired ? " fired" : " not fired") << ": " << c.detail;
    for (const auto& e : c.evidence) os << "; " << e.name << " = " << num(e.value);
    os << "\n";
    if (c.fired) os << "     " << c.citation << "\n";
  }
  os << "flags: small_time_locally_controllable = " << to_string(v.flags.small_time_locally_controllable)
     << ", linearized_controllable = " << (v.flags.linearized_controllable ? "true" : "false") << "\n";
  for (const auto& w : v.warnings) os << "warning: " << w << "\n";
  for (const auto& n : v.notes) os << "note: " << n << "\n";
}

void print_fit(std::ostream& os, const DecayFit& f) {
  os << "M_hat = " << num(f.M_hat) << ", alpha_hat = " << num(f.alpha_hat) << ", residual = " << num(f.residual)
     << ", certified = " << (f.certified ? "true" : "false");
}

int cmd_analyze(const std::string& path, bool json, const GlobalFlags& g) {
  auto system = load_system(path);
  auto a = analyze_full(system, analysis_options(g));
  if (json) {
    std::cout << to_json(make_report(system, a, g.seed)).dump(2) << "\n";
  } else {
    print_analysis(std::cout, system, a);
  }
  return 0;
}

struct SynthesizeFlags {
  std::string poles;
  bool force = false;
  bool validate = false;
  double delta = 0.05;
  int samples = 100;
  bool json = false;
};

int cmd_synthesize(const std::string& path, const SynthesizeFlags& f, const GlobalFlags& g) {
  auto system = load_system(path);
  auto a = analyze_full(system, analysis_options(g));
  if (!a.hautus.holds) {
    throw PreconditionError("uncontrollable unstable mode at λ=" + format_complex(a.hautus.failures.front()));
  }
  if (!is_positive(a.verdict.decision) && !f.force) {
    throw PreconditionError("verdict is " + std::string(to_string(a.verdict.decision)) +
                            "; pass --force to synthesize a linear gain anyway");
  }
  SynthesisOptions so;
  so.seed = g.seed;
  so.rank_relative = g.tol_rank;
  so.tol_class = g.tol_class;
  if (!f.poles.empty()) so.poles = parse_poles(f.poles);
  auto gain = synthesize_gain(a.lin.A, a.lin.B, system.mode(), so);
  auto doc = make_report(system, a, g.seed);
  doc.gain = summarize_gain(system, gain);
  if (f.validate) {
    auto check = verify_local_stability(system, Feedback::linear(gain.K), f.delta, f.samples);
    doc.validation = summarize_validation(check);
  }
  if (f.json) {
    std::cout << to_json(doc).dump(2) << "\n";
    return 0;
  }
  print_analysis(std::cout, system, a);
  std::cout << "gain K = " << mat(gain.K) << "  (u = u* + K (x - x*))\n";
  std::cout << "target poles: " << complex_list(gain.target_poles) << "\n";
  std::cout << "closed-loop poles: " << complex_list(gain.achieved_poles) << "\n";
  for (const auto& e : doc.gain->expressions) std::cout << "feedback: " << e << "\n";
  if (doc.validation) {
    const auto& v = *doc.validation;
    std::cout << "validation: " << (v.pass ? "pass (empirically certified)" : "fail") << ", delta = " << num(v.delta)
              << ", samples = " << v.samples << ", failures = " << v.failures.size() << "\n";
    std::cout << "worst fit: ";
    print_fit(std::cout, v.worst);
    std::cout << "\n";
  }
  return 0;
}

int cmd_covering(const std::string& path, const std::string& radii_text, bool json, const GlobalFlags& g) {
  auto system = load_system(path);
  auto radii = parse_reals(radii_text);
  if (radii.empty()) throw ValidationError("--radius needs at least one value");
  CoveringSweep sweep;
  try {
    sweep = covering_sweep(system, radii);
  } catch (const PreconditionError& e) {
    throw ValidationError(e.what());
  }
  if (json) {
    Json rows = Json::array();
    for (const auto& s : sweep.samples) {
      rows.push_back({{"r", s.radius}, {"kappa_hat", s.modulus}, {"ratio", s.ratio}});
    }
    Json j = {{"tool", "linopen"}, {"version", LINOPEN_VERSION}, {"seed", g.seed},
              {"samples", rows}, {"linear_openness_suspect", sweep.linear_openness_suspect}};
    std::cout << j.dump(2) << "\n";
    return 0;
  }
  std::printf("%-16s %-20s %-20s\n", "r", "kappa_hat(r)", "kappa_hat(r)/r");
  for (const auto& s : sweep.samples) {
    std::printf("%-16.12g %-20.12g %-20.12g\n", s.radius, s.modulus, s.ratio);
  }
  if (sweep.linear_openness_suspect) std::printf("linear openness suspect\n");
  return 0;
}

struct SimulateFlags {
  std::string gain;
  std::string feedback;
  std::string x0;
  double T = kDefaultHorizon;
  double dt = kDefaultStep;
  int steps = kDefaultIterations;
  std::string output;
};

int cmd_simulate(const std::string& path, const SimulateFlags& f) {
  auto system = load_system(path);
  if (f.gain.empty() == f.feedback.empty()) throw ValidationError("give exactly one of --gain or --feedback");
  Feedback fb = f.gain.empty() ? parse_feedback(f.feedback, system.m())
                               : Feedback::linear(parse_gain(f.gain, system.m(), system.n()));
  auto x0v = parse_reals(f.x0);
  if (static_cast<int>(x0v.size()) != system.n()) {
    throw ValidationError("--x0 needs " + std::to_string(system.n()) + " entries");
  }
  Vector x0 = Eigen::Map<Vector>(x0v.data(), static_cast<Eigen::Index>(x0v.size()));
  Horizon h{f.T, f.dt, f.steps};
  Trajectory traj;
  try {
    traj = run_closed_loop(system, fb, x0, h);
  } catch (const PreconditionError& e) {
    throw ValidationError(e.what());
  }
  const std::string csv = trajectory_csv(traj);
  std::ostream* summary = &std::cerr;
  if (f.output.empty()) {
    std::cout << csv;
  } else {
    std::ofstream out(f.output);
    if (!out) throw ValidationError("cannot write " + f.output);
    out << csv;
    summary = &std::cout;
  }
  auto& os = *summary;
  os << "summary: feedback " << traj.feedback_used << ", " << traj.states.size() << " samples";
  os << ", final |x - x*| = " << num((traj.states.back() - traj.equilibrium).norm());
  if (traj.diverged) os << ", diverged at t = " << num(traj.times.back());
  if ((x0 - system.equilibrium_x()).norm() == 0.0) {
    os << ", x0 is the equilibrium (no decay fit)\n";
  } else {
    os << ", ";
    print_fit(os, estimate_decay(traj));
    os << "\n";
  }
  if (!fb.is_linear() && !fb.is_c1()) {
    os << "warning: feedback law not recognized as C1; uniqueness of the closed-loop solution is not verified\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stabilizability analysis of nonlinear control systems via linear openness"};
  app.set_version_flag("--version", LINOPEN_VERSION);
  app.require_subcommand(1);
  app.fallthrough();
  GlobalFlags g;
  app.add_option("--tol-rank", g.tol_rank, "Relative rank tolerance (times sigma_max * max dimension)");
  app.add_option("--tol-class", g.tol_class, "Spectral classification tolerance");
  app.add_option("--margin", g.margin, "Required margin in cov > eta + margin");
  app.add_option("--seed", g.seed, "Seed for randomized placement");
  app.add_flag("--assume-bounded-perturbation", g.assume_bounded,
               "Assert the nonlinear remainder is bounded (enables the global controllability note)");

  std::string path;
  bool json = false;

  auto* analyze = app.add_subcommand("analyze", "Linearize, measure openness and decide stabilizability");
  analyze->add_option("file", path, "System file")->required();
  analyze->add_flag("--json", json, "Emit the JSON report");

  SynthesizeFlags sf;
  auto* synth = app.add_subcommand("synthesize", "Construct a stabilizing linear gain");
  synth->add_option("file", path, "System file")->required();
  synth->add_option("--poles", sf.poles, "Comma separated closed-loop poles, e.g. -1,-2 or -1+2i,-1-2i");
  synth->add_flag("--force", sf.force, "Synthesize even when the verdict is not positive");
  synth->add_flag("--validate", sf.validate, "Run the sampled local stability check");
  synth->add_option("--delta", sf.delta, "Validation radius")->capture_default_str();
  synth->add_option("--samples", sf.samples, "Validation sample count")->capture_default_str();
  synth->add_flag("--json", sf.json, "Emit the JSON report");

  std::string radii = "0.1,0.05,0.025";
  auto* cover = app.add_subcommand("covering", "Empirical covering-modulus sweep (states + controls <= 3)");
  cover->add_option("file", path, "System file")->required();
  cover->add_option("--radius", radii, "Comma separated radii")->capture_default_str();
  cover->add_flag("--json", json, "Emit JSON");

  SimulateFlags mf;
  auto* sim = app.add_subcommand("simulate", "Integrate or iterate the closed loop and write CSV");
  sim->add_option("file", path, "System file")->required();
  sim->add_option("--gain", mf.gain, "Gain rows \"k11 k12; k21 k22\", a file holding them, or a JSON report");
  sim->add_option("--feedback", mf.feedback, "Feedback laws \"u1 = -x1 - x2; u2 = ...\"");
  sim->add_option("--x0", mf.x0, "Initial state, comma separated")->required();
  sim->add_option("-T,--horizon", mf.T, "Continuous horizon")->capture_default_str();
  sim->add_option("--dt", mf.dt, "Continuous step")->capture_default_str();
  sim->add_option("--steps", mf.steps, "Discrete iteration count")->capture_default_str();
  sim->add_option("-o,--output", mf.output, "Write CSV here instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : kExitInput;
  }

  try {
    if (*analyze) return cmd_analyze(path, json, g);
    if (*synth) return cmd_synthesize(path, sf, g);
    if (*cover) return cmd_covering(path, radii, json, g);
    if (*sim) return cmd_simulate(path, mf);
  } catch (const ParseError& e) {
    std::cerr << "error: " << path << ": " << e.what() << "\n";
    return kExitInput;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const EvalError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const PreconditionError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitPrecondition;
  } catch (const Json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumeric;
  }
  return 0;
}
