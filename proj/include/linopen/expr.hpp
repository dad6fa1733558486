#pragma once

// Expression language for vector fields and feedback laws.
//
//   expr   := term (('+'|'-') term)*
//   term   := factor (('*'|'/') factor)*
//   factor := base ('^' number)?
//   base   := number | ident | '(' expr ')' | '-' base | func '(' expr ')'
//   ident  := ('x'|'u') digits
//   func   := 'sin' | 'cos' | 'exp' | 'tanh'
//
// Whitespace is insignificant. Variables are 1-indexed.

#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "linopen/errors.hpp"

namespace linopen {

enum class NodeKind { constant, state, control, neg, add, sub, mul, div, pow, func };

enum class Function { sin, cos, exp, tanh };

struct Node;
using Expr = std::shared_ptr<const Node>;

/// Immutable AST node. `pow` keeps its exponent as a constant second child.
struct Node {
  NodeKind kind = NodeKind::constant;
  double value = 0.0;
  int index = 0;
  Function func = Function::sin;
  std::vector<Expr> children;
};

inline Expr constant(double v) {
  auto n = std::make_shared<Node>();
  n->kind = NodeKind::constant;
  n->value = v;
  return n;
}

inline Expr state_var(int index) {
  auto n = std::make_shared<Node>();
  n->kind = NodeKind::state;
  n->index = index;
  return n;
}

inline Expr control_var(int index) {
  auto n = std::make_shared<Node>();
  n->kind = NodeKind::control;
  n->index = index;
  return n;
}

inline Expr negate(Expr child) {
  auto n = std::make_shared<Node>();
  n->kind = NodeKind::neg;
  n->children = {std::move(child)};
  return n;
}

inline Expr binary(NodeKind kind, Expr lhs, Expr rhs) {
  auto n = std::make_shared<Node>();
  n->kind = kind;
  n->children = {std::move(lhs), std::move(rhs)};
  return n;
}

inline Expr power(Expr base, double exponent) {
  auto n = std::make_shared<Node>();
  n->kind = NodeKind::pow;
  n->children = {std::move(base), constant(exponent)};
  return n;
}

inline Expr call(Function f, Expr arg) {
  auto n = std::make_shared<Node>();
  n->kind = NodeKind::func;
  n->func = f;
  n->children = {std::move(arg)};
  return n;
}

inline double exponent_of(const Node& pow_node) { return pow_node.children[1]->value; }

inline std::string_view function_name(Function f) {
  switch (f) {
    case Function::sin: return "sin";
    case Function::cos: return "cos";
    case Function::exp: return "exp";
    case Function::tanh: return "tanh";
  }
  return "?";
}

inline bool structurally_equal(const Node& a, const Node& b) {
  if (a.kind != b.kind) return false;
  switch (a.kind) {
    case NodeKind::constant:
      return a.value == b.value;
    case NodeKind::state:
    case NodeKind::control:
      return a.index == b.index;
    case NodeKind::func:
      if (a.func != b.func) return false;
      break;
    default:
      break;
  }
  if (a.children.size() != b.children.size()) return false;
  for (std::size_t i = 0; i < a.children.size(); ++i) {
    if (!structurally_equal(*a.children[i], *b.children[i])) return false;
  }
  return true;
}

/// Largest state and control index referenced anywhere in the tree.
inline std::pair<int, int> max_variable_indices(const Node& n) {
  std::pair<int, int> out{0, 0};
  if (n.kind == NodeKind::state) out.first = n.index;
  if (n.kind == NodeKind::control) out.second = n.index;
  for (const auto& c : n.children) {
    auto [s, u] = max_variable_indices(*c);
    out.first = std::max(out.first, s);
    out.second = std::max(out.second, u);
  }
  return out;
}

inline bool mentions_control(const Node& n) {
  if (n.kind == NodeKind::control) return true;
  for (const auto& c : n.children) {
    if (mentions_control(*c)) return true;
  }
  return false;
}

/// True when every sub-expression is C¹ everywhere: no division and no
/// fractional exponent below one.
inline bool is_globally_c1(const Node& n) {
  if (n.kind == NodeKind::div) return false;
  if (n.kind == NodeKind::pow) {
    double p = exponent_of(n);
    if (p != std::floor(p) && p < 1.0) return false;
  }
  for (const auto& c : n.children) {
    if (!is_globally_c1(*c)) return false;
  }
  return true;
}

namespace detail {

class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text) {}

  Expr parse() {
    skip_ws();
    if (pos_ == text_.size()) fail("empty expression");
    Expr e = parse_expr();
    skip_ws();
    if (pos_ != text_.size()) fail("unexpected character '" + std::string(1, text_[pos_]) + "'");
    return e;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const {
    throw ParseError("syntax error at offset " + std::to_string(pos_) + ": " + msg, pos_);
  }

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  bool at_number_start() const {
    if (pos_ >= text_.size()) return false;
    char c = text_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c))) return true;
    return c == '.' && pos_ + 1 < text_.size() &&
           std::isdigit(static_cast<unsigned char>(text_[pos_ + 1]));
  }

  double parse_number() {
    std::size_t start = pos_;
    auto digits = [&] {
      while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    };
    digits();
    if (pos_ < text_.size() && text_[pos_] == '.') {
      ++pos_;
      digits();
    }
    if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
      std::size_t save = pos_;
      ++pos_;
      if (pos_ < text_.size() && (text_[pos_] == '+' || text_[pos_] == '-')) ++pos_;
      if (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
        digits();
      } else {
        pos_ = save;
      }
    }
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(text_.data() + start, text_.data() + pos_, v);
    if (ec != std::errc{} || ptr != text_.data() + pos_) {
      std::size_t bad = start;
      pos_ = bad;
      fail("malformed number");
    }
    return v;
  }

  Expr parse_expr() {
    Expr lhs = parse_term();
    for (;;) {
      if (accept('+')) {
        lhs = binary(NodeKind::add, lhs, parse_term());
      } else if (accept('-')) {
        lhs = binary(NodeKind::sub, lhs, parse_term());
      } else {
        return lhs;
      }
    }
  }

  Expr parse_term() {
    Expr lhs = parse_factor();
    for (;;) {
      if (accept('*')) {
        lhs = binary(NodeKind::mul, lhs, parse_factor());
      } else if (accept('/')) {
        lhs = binary(NodeKind::div, lhs, parse_factor());
      } else {
        return lhs;
      }
    }
  }

  Expr parse_factor() {
    Expr base = parse_base();
    if (accept('^')) {
      skip_ws();
      if (!at_number_start()) {
        throw ParseError("non-constant exponent at offset " + std::to_string(pos_) +
                             ": exponent must be a numeric literal",
                         pos_);
      }
      return power(base, parse_number());
    }
    return base;
  }

  Expr parse_base() {
    skip_ws();
    if (pos_ >= text_.size()) fail("unexpected end of input");
    char c = text_[pos_];
    if (at_number_start()) return constant(parse_number());
    if (c == '(') {
      ++pos_;
      Expr e = parse_expr();
      if (!accept(')')) fail("expected ')'");
      return e;
    }
    if (c == '-') {
      ++pos_;
      return negate(parse_base());
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return parse_identifier();
    fail("unexpected character '" + std::string(1, c) + "'");
  }

  Expr parse_identifier() {
    std::size_t start = pos_;
    while (pos_ < text_.size() &&
           (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) {
      ++pos_;
    }
    std::string_view id = text_.substr(start, pos_ - start);
    static constexpr std::array<std::pair<std::string_view, Function>, 4> kFunctions{{
        {"sin", Function::sin},
        {"cos", Function::cos},
        {"exp", Function::exp},
        {"tanh", Function::tanh},
    }};
    for (const auto& [name, f] : kFunctions) {
      if (id == name) {
        if (!accept('(')) fail("expected '(' after " + std::string(name));
        Expr arg = parse_expr();
        if (!accept(')')) fail("expected ')'");
        return call(f, arg);
      }
    }
    bool digits_only = id.size() > 1;
    for (std::size_t i = 1; i < id.size(); ++i) {
      if (!std::isdigit(static_cast<unsigned char>(id[i]))) digits_only = false;
    }
    if (digits_only && (id[0] == 'x' || id[0] == 'u') && id.size() < 10) {
      int index = 0;
      std::from_chars(id.data() + 1, id.data() + id.size(), index);
      return id[0] == 'x' ? state_var(index) : control_var(index);
    }
    throw ParseError("unknown identifier \"" + std::string(id) + "\" at offset " +
                         std::to_string(start),
                     start);
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

inline std::string format_number(double v) {
  std::array<char, 64> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), ptr);
}

inline int precedence(const Node& n) {
  switch (n.kind) {
    case NodeKind::add:
    case NodeKind::sub: return 1;
    case NodeKind::mul:
    case NodeKind::div: return 2;
    case NodeKind::pow: return 3;
    default: return 4;
  }
}

inline void unparse_into(const Node& n, std::string& out) {
  auto wrapped = [&](const Node& child, bool parens) {
    if (parens) out += '(';
    unparse_into(child, out);
    if (parens) out += ')';
  };
  switch (n.kind) {
    case NodeKind::constant:
      if (std::signbit(n.value)) {
        out += "(-" + format_number(-n.value) + ")";
      } else {
        out += format_number(n.value);
      }
      return;
    case NodeKind::state:
      out += "x" + std::to_string(n.index);
      return;
    case NodeKind::control:
      out += "u" + std::to_string(n.index);
      return;
    case NodeKind::neg:
      out += '-';
      wrapped(*n.children[0], precedence(*n.children[0]) < 4);
      return;
    case NodeKind::func:
      out += function_name(n.func);
      wrapped(*n.children[0], true);
      return;
    case NodeKind::pow:
      wrapped(*n.children[0], precedence(*n.children[0]) < 4);
      out += '^';
      out += format_number(exponent_of(n));
      return;
    case NodeKind::add:
    case NodeKind::sub:
    case NodeKind::mul:
    case NodeKind::div: {
      int p = precedence(n);
      wrapped(*n.children[0], precedence(*n.children[0]) < p);
      switch (n.kind) {
        case NodeKind::add: out += " + "; break;
        case NodeKind::sub: out += " - "; break;
        case NodeKind::mul: out += "*"; break;
        default: out += "/"; break;
      }
      wrapped(*n.children[1], precedence(*n.children[1]) <= p);
      return;
    }
  }
}

}  // namespace detail

/// Parses one expression. Throws ParseError carrying the byte offset.
inline Expr parse_expr(std::string_view text) { return detail::Parser(text).parse(); }

/// Minimal-parenthesis printer; parse(unparse(e)) reproduces e structurally for
/// every tree the parser can build.
inline std::string unparse(const Node& n) {
  std::string out;
  detail::unparse_into(n, out);
  return out;
}

inline std::string unparse(const Expr& e) { return unparse(*e); }

// Scalar hooks used by evaluate<T>; overloaded for Dual in dual.hpp.
inline double primal(double v) { return v; }

inline double pow_scalar(double base, double p) { return std::pow(base, p); }

/// Evaluates the tree over any scalar supporting + - * / and the four
/// functions. Throws EvalError on division by zero or non-finite results.
template <class T>
T evaluate(const Node& n, std::span<const T> x, std::span<const T> u) {
  using std::cos;
  using std::exp;
  using std::sin;
  using std::tanh;
  auto finite = [](T v, const char* what) {
    if (!std::isfinite(primal(v))) throw EvalError(std::string("domain error in ") + what);
    return v;
  };
  switch (n.kind) {
    case NodeKind::constant:
      return T(n.value);
    case NodeKind::state:
      if (n.index < 1 || static_cast<std::size_t>(n.index) > x.size()) {
        throw EvalError("state index x" + std::to_string(n.index) + " out of range");
      }
      return x[n.index - 1];
    case NodeKind::control:
      if (n.index < 1 || static_cast<std::size_t>(n.index) > u.size()) {
        throw EvalError("control index u" + std::to_string(n.index) + " out of range");
      }
      return u[n.index - 1];
    case NodeKind::neg:
      return -evaluate<T>(*n.children[0], x, u);
    case NodeKind::add:
      return finite(evaluate<T>(*n.children[0], x, u) + evaluate<T>(*n.children[1], x, u),
                    "addition");
    case NodeKind::sub:
      return finite(evaluate<T>(*n.children[0], x, u) - evaluate<T>(*n.children[1], x, u),
                    "subtraction");
    case NodeKind::mul:
      return finite(evaluate<T>(*n.children[0], x, u) * evaluate<T>(*n.children[1], x, u),
                    "multiplication");
    case NodeKind::div: {
      T num = evaluate<T>(*n.children[0], x, u);
      T den = evaluate<T>(*n.children[1], x, u);
      if (primal(den) == 0.0) throw EvalError("division by zero");
      return finite(num / den, "division");
    }
    case NodeKind::pow:
      return finite(pow_scalar(evaluate<T>(*n.children[0], x, u), exponent_of(n)), "pow");
    case NodeKind::func: {
      T a = evaluate<T>(*n.children[0], x, u);
      switch (n.func) {
        case Function::sin: return sin(a);
        case Function::cos: return cos(a);
        case Function::exp: return finite(exp(a), "exp");
        case Function::tanh: return tanh(a);
      }
    }
  }
  throw EvalError("corrupt expression node");
}

inline double evaluate(const Node& n, std::span<const double> x, std::span<const double> u) {
  return evaluate<double>(n, x, u);
}

}  // namespace linopen
