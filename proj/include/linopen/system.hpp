#pragma once

#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "linopen/dual.hpp"
#include "linopen/errors.hpp"
#include "linopen/expr.hpp"
#include "linopen/numlin.hpp"
#include "linopen/sampling.hpp"

namespace linopen {

enum class Mode { continuous, discrete };

inline std::string_view to_string(Mode mode) {
  return mode == Mode::continuous ? "continuous" : "discrete";
}

/// Residual allowed at the declared equilibrium (continuous) or fixed point (discrete).
inline constexpr double kEquilibriumTolerance = 1e-9;

/// Partial Jacobians of f at the equilibrium.
struct Linearization {
  Matrix A;
  Matrix B;
};

/// Evaluates a list of component expressions at (x, u).
inline Vector evaluate_components(const std::vector<Expr>& components, const Vector& x,
                                  const Vector& u) {
  Vector out(static_cast<Eigen::Index>(components.size()));
  std::span<const double> xs(x.data(), static_cast<std::size_t>(x.size()));
  std::span<const double> us(u.data(), static_cast<std::size_t>(u.size()));
  for (std::size_t i = 0; i < components.size(); ++i) {
    out(static_cast<Eigen::Index>(i)) = evaluate<double>(*components[i], xs, us);
  }
  return out;
}

/// Forward-mode Jacobians of `components` at (x, u), one seed per input variable.
inline Linearization jacobian_at(const std::vector<Expr>& components, const Vector& x,
                                 const Vector& u) {
  const Eigen::Index rows = static_cast<Eigen::Index>(components.size());
  const Eigen::Index n = x.size();
  const Eigen::Index m = u.size();
  Linearization lin{Matrix::Zero(rows, n), Matrix::Zero(rows, m)};
  std::vector<Dual> xd(static_cast<std::size_t>(n));
  std::vector<Dual> ud(static_cast<std::size_t>(m));
  for (Eigen::Index i = 0; i < n; ++i) xd[static_cast<std::size_t>(i)] = Dual(x(i));
  for (Eigen::Index i = 0; i < m; ++i) ud[static_cast<std::size_t>(i)] = Dual(u(i));
  for (Eigen::Index seed = 0; seed < n + m; ++seed) {
    Dual& slot = seed < n ? xd[static_cast<std::size_t>(seed)]
                          : ud[static_cast<std::size_t>(seed - n)];
    slot.d = 1.0;
    for (Eigen::Index r = 0; r < rows; ++r) {
      Dual y = evaluate<Dual>(*components[static_cast<std::size_t>(r)], xd, ud);
      if (!std::isfinite(y.d)) throw EvalError("non-differentiable point reached");
      if (seed < n) {
        lin.A(r, seed) = y.d;
      } else {
        lin.B(r, seed - n) = y.d;
      }
    }
    slot.d = 0.0;
  }
  return lin;
}

/// A parsed, validated control system x' = f(x,u) or x+ = f(x,u).
class SystemSpec {
 public:
  /// Validates dimensions, variable indices and the equilibrium residual.
  static SystemSpec create(Mode mode, std::vector<Expr> components, Vector equilibrium_x,
                           Vector equilibrium_u) {
    SystemSpec s;
    s.mode_ = mode;
    s.n_ = static_cast<int>(components.size());
    s.m_ = static_cast<int>(equilibrium_u.size());
    s.components_ = std::move(components);
    s.eq_x_ = std::move(equilibrium_x);
    s.eq_u_ = std::move(equilibrium_u);
    s.validate();
    return s;
  }

  int n() const { return n_; }
  int m() const { return m_; }
  Mode mode() const { return mode_; }
  const std::vector<Expr>& components() const { return components_; }
  const Vector& equilibrium_x() const { return eq_x_; }
  const Vector& equilibrium_u() const { return eq_u_; }

  Vector eval(const Vector& x, const Vector& u) const {
    if (x.size() != n_ || u.size() != m_) throw ValidationError("eval: dimension mismatch");
    return evaluate_components(components_, x, u);
  }

  /// f(x*,u*) in continuous mode, f(x*,u*) - x* in discrete mode.
  Vector equilibrium_residual() const {
    Vector f = eval(eq_x_, eq_u_);
    return mode_ == Mode::continuous ? f : Vector(f - eq_x_);
  }

 private:
  SystemSpec() = default;

  void validate() const {
    if (n_ < 1) throw ValidationError("state dimension must be positive");
    if (m_ < 1) throw ValidationError("control dimension must be positive (uncontrolled systems are not supported)");
    if (n_ > kMaxDimension) {
      throw ValidationError("state dimension " + std::to_string(n_) + " exceeds cap of " +
                            std::to_string(kMaxDimension));
    }
    if (eq_x_.size() != n_) throw ValidationError("equilibrium x has wrong length");
    if (!eq_x_.allFinite() || !eq_u_.allFinite()) throw ValidationError("equilibrium is not finite");
    for (std::size_t i = 0; i < components_.size(); ++i) {
      if (!components_[i]) throw ValidationError("missing component f" + std::to_string(i + 1));
      auto [xs, us] = max_variable_indices(*components_[i]);
      if (xs > n_) {
        throw ValidationError("f" + std::to_string(i + 1) + " uses x" + std::to_string(xs) +
                              " but states = " + std::to_string(n_));
      }
      if (us > m_) {
        throw ValidationError("f" + std::to_string(i + 1) + " uses u" + std::to_string(us) +
                              " but controls = " + std::to_string(m_));
      }
      check_indices_positive(*components_[i], i);
    }
    Vector residual;
    try {
      residual = equilibrium_residual();
    } catch (const EvalError& e) {
      throw ValidationError(std::string("cannot evaluate f at the equilibrium: ") + e.what());
    }
    if (residual.norm() > kEquilibriumTolerance) {
      std::ostringstream os;
      os.precision(12);
      os << (mode_ == Mode::continuous ? "declared point is not an equilibrium: |f(x*,u*)| = "
                                       : "declared point is not a fixed point: |f(x*,u*) - x*| = ")
         << residual.norm();
      throw ValidationError(os.str());
    }
  }

  static void check_indices_positive(const Node& node, std::size_t component) {
    if ((node.kind == NodeKind::state || node.kind == NodeKind::control) && node.index < 1) {
      throw ValidationError("f" + std::to_string(component + 1) +
                            ": variable indices start at 1");
    }
    for (const auto& c : node.children) check_indices_positive(*c, component);
  }

  Mode mode_ = Mode::continuous;
  int n_ = 0;
  int m_ = 0;
  std::vector<Expr> components_;
  Vector eq_x_;
  Vector eq_u_;
};

inline Vector eval(const SystemSpec& system, const Vector& x, const Vector& u) {
  return system.eval(x, u);
}

/// (A, B) at the declared equilibrium.
inline Linearization jacobian(const SystemSpec& system) {
  return jacobian_at(system.components(), system.equilibrium_x(), system.equilibrium_u());
}

/// Division denominators of f that vanish, or change sign, inside the ball of
/// the given radius around (x*, u*). Sampled, not certified.
inline std::vector<std::string> singularity_warnings(const SystemSpec& system, double radius,
                                                     std::size_t samples = 256) {
  std::vector<std::pair<std::size_t, Expr>> denominators;
  auto collect = [&](auto&& self, const Expr& e, std::size_t comp) -> void {
    if (e->kind == NodeKind::div) denominators.emplace_back(comp, e->children[1]);
    for (const auto& c : e->children) self(self, c, comp);
  };
  for (std::size_t i = 0; i < system.components().size(); ++i) {
    collect(collect, system.components()[i], i);
  }
  std::vector<std::string> out;
  const Eigen::Index dim = system.n() + system.m();
  for (const auto& [comp, den] : denominators) {
    std::vector<Expr> single{den};
    auto value_at = [&](const Vector& z) -> std::optional<double> {
      try {
        return evaluate_components(single, z.head(system.n()), z.tail(system.m()))(0);
      } catch (const EvalError&) {
        return std::nullopt;
      }
    };
    Vector center(dim);
    center << system.equilibrium_x(), system.equilibrium_u();
    auto c0 = value_at(center);
    bool flagged = !c0 || *c0 == 0.0;
    for (std::size_t k = 0; k < samples && !flagged; ++k) {
      auto v = value_at(center + radius * sampling::ball_point(k, dim));
      if (!v || *v == 0.0 || std::signbit(*v) != std::signbit(*c0)) flagged = true;
    }
    if (flagged) {
      std::ostringstream os;
      os << "division singularity of f" << comp + 1 << " (denominator " << unparse(den)
         << ") lies within radius " << radius << " of the equilibrium";
      out.push_back(os.str());
    }
  }
  return out;
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

inline std::vector<std::pair<std::string_view, std::size_t>> split_words(std::string_view s,
                                                                        std::size_t base) {
  std::vector<std::pair<std::string_view, std::size_t>> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    std::size_t start = i;
    while (i < s.size() && !std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    if (i > start) out.emplace_back(s.substr(start, i - start), base + start);
  }
  return out;
}

inline double parse_real(std::string_view word, std::size_t line, std::size_t offset) {
  double v = 0.0;
  const char* first = word.data();
  if (!word.empty() && word.front() == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, word.data() + word.size(), v);
  if (ec != std::errc{} || ptr != word.data() + word.size() || !std::isfinite(v)) {
    throw ParseError("line " + std::to_string(line) + ", offset " + std::to_string(offset) +
                         ": expected a real number, got \"" + std::string(word) + "\"",
                     offset, line);
  }
  return v;
}

inline int parse_positive(std::string_view word, std::size_t line, std::size_t offset) {
  int v = 0;
  auto [ptr, ec] = std::from_chars(word.data(), word.data() + word.size(), v);
  if (ec != std::errc{} || ptr != word.data() + word.size() || v < 1) {
    throw ParseError("line " + std::to_string(line) + ", offset " + std::to_string(offset) +
                         ": expected a positive integer, got \"" + std::string(word) + "\"",
                     offset, line);
  }
  return v;
}

}  // namespace detail

/// Parses the line-oriented system file format. Parse failures carry the
/// 1-based line and the byte offset within that line; semantic failures raise
/// ValidationError.
inline SystemSpec parse_system(std::string_view text) {
  std::optional<Mode> mode;
  std::optional<int> n;
  std::optional<int> m;
  std::optional<Vector> eq_x;
  std::optional<Vector> eq_u;
  std::vector<std::pair<int, Expr>> comps;
  std::vector<std::pair<std::string_view, std::size_t>> eq_x_words;
  std::vector<std::pair<std::string_view, std::size_t>> eq_u_words;
  std::size_t eq_x_line = 0;
  std::size_t eq_u_line = 0;

  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view raw = text.substr(pos, end - pos);
    ++line_no;
    pos = end + 1;
    if (auto hash = raw.find('#'); hash != std::string_view::npos) raw = raw.substr(0, hash);
    if (!raw.empty() && raw.back() == '\r') raw.remove_suffix(1);
    if (detail::trim(raw).empty()) {
      if (end == text.size()) break;
      continue;
    }
    auto fail = [&](std::size_t offset, const std::string& msg) -> ParseError {
      return ParseError("line " + std::to_string(line_no) + ", offset " + std::to_string(offset) +
                            ": " + msg,
                        offset, line_no);
    };
    auto words = detail::split_words(raw, 0);
    std::string_view key = words[0].first;

    if (key == "mode") {
      if (words.size() != 2) throw fail(words[0].second, "expected 'mode continuous|discrete'");
      if (mode) throw fail(words[0].second, "duplicate 'mode'");
      if (words[1].first == "continuous") {
        mode = Mode::continuous;
      } else if (words[1].first == "discrete") {
        mode = Mode::discrete;
      } else {
        throw fail(words[1].second, "unknown mode \"" + std::string(words[1].first) + "\"");
      }
    } else if (key == "states" || key == "controls") {
      if (words.size() != 2) throw fail(words[0].second, "expected '" + std::string(key) + " <count>'");
      auto& slot = key == "states" ? n : m;
      if (slot) throw fail(words[0].second, "duplicate '" + std::string(key) + "'");
      slot = detail::parse_positive(words[1].first, line_no, words[1].second);
    } else if (key == "eq") {
      if (words.size() < 3 || words[2].first != "=" || (words[1].first != "x" && words[1].first != "u")) {
        throw fail(words[0].second, "expected 'eq x = ...' or 'eq u = ...'");
      }
      bool is_x = words[1].first == "x";
      auto& target = is_x ? eq_x_words : eq_u_words;
      if ((is_x ? eq_x_line : eq_u_line) != 0) {
        throw fail(words[0].second, "duplicate 'eq " + std::string(words[1].first) + "'");
      }
      (is_x ? eq_x_line : eq_u_line) = line_no;
      target.assign(words.begin() + 3, words.end());
      Vector v(static_cast<Eigen::Index>(target.size()));
      for (std::size_t i = 0; i < target.size(); ++i) {
        v(static_cast<Eigen::Index>(i)) = detail::parse_real(target[i].first, line_no, target[i].second);
      }
      (is_x ? eq_x : eq_u) = v;
    } else if (key.size() >= 2 && key[0] == 'f') {
      std::size_t eqpos = raw.find('=');
      if (eqpos == std::string_view::npos) throw fail(words[0].second, "expected 'f<i> = <expression>'");
      std::string_view lhs = detail::trim(raw.substr(0, eqpos));
      std::string_view digits = lhs.substr(1);
      if (!digits.empty() && digits[0] == '_') digits.remove_prefix(1);
      int index = detail::parse_positive(digits, line_no, words[0].second);
      for (const auto& [k, e] : comps) {
        if (k == index) throw fail(words[0].second, "duplicate component f" + std::to_string(index));
      }
      std::string_view rhs = raw.substr(eqpos + 1);
      try {
        comps.emplace_back(index, parse_expr(rhs));
      } catch (const ParseError& e) {
        std::size_t offset = eqpos + 1 + e.offset();
        throw ParseError("line " + std::to_string(line_no) + ", offset " + std::to_string(offset) +
                             ": " + e.what(),
                         offset, line_no);
      }
    } else {
      throw fail(words[0].second, "unknown directive \"" + std::string(key) + "\"");
    }
    if (end == text.size()) break;
  }

  if (!mode) throw ParseError("missing 'mode' line", 0, line_no);
  if (!n) throw ParseError("missing 'states' line", 0, line_no);
  if (!m) throw ParseError("missing 'controls' line", 0, line_no);
  if (*n > kMaxDimension) {
    throw ValidationError("state dimension " + std::to_string(*n) + " exceeds cap of " +
                          std::to_string(kMaxDimension));
  }
  Vector x = eq_x.value_or(Vector::Zero(*n));
  Vector u = eq_u.value_or(Vector::Zero(*m));
  if (x.size() != *n) {
    throw ParseError("line " + std::to_string(eq_x_line) + ": 'eq x' needs " + std::to_string(*n) +
                         " values, got " + std::to_string(x.size()),
                     0, eq_x_line);
  }
  if (u.size() != *m) {
    throw ParseError("line " + std::to_string(eq_u_line) + ": 'eq u' needs " + std::to_string(*m) +
                         " values, got " + std::to_string(u.size()),
                     0, eq_u_line);
  }
  std::vector<Expr> components(static_cast<std::size_t>(*n));
  for (auto& [k, e] : comps) {
    if (k > *n) throw ValidationError("component f" + std::to_string(k) + " exceeds states = " + std::to_string(*n));
    components[static_cast<std::size_t>(k - 1)] = e;
  }
  for (std::size_t i = 0; i < components.size(); ++i) {
    if (!components[i]) throw ValidationError("missing component f" + std::to_string(i + 1));
  }
  return SystemSpec::create(*mode, std::move(components), std::move(x), std::move(u));
}

inline SystemSpec load_system(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open system file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_system(buf.str());
}

/// Serializes back into the file format; doubles keep round-trip precision.
inline std::string format_system(const SystemSpec& system) {
  std::ostringstream os;
  os << "mode " << to_string(system.mode()) << "\n";
  os << "states " << system.n() << "\n";
  os << "controls " << system.m() << "\n";
  os << "eq x =";
  for (double v : system.equilibrium_x()) os << ' ' << detail::format_number(v);
  os << "\neq u =";
  for (double v : system.equilibrium_u()) os << ' ' << detail::format_number(v);
  os << "\n";
  for (std::size_t i = 0; i < system.components().size(); ++i) {
    os << "f" << i + 1 << " = " << unparse(system.components()[i]) << "\n";
  }
  return os.str();
}

}  // namespace linopen
