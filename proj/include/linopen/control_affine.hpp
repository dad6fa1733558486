#pragma once

#include <optional>
#include <vector>

#include "linopen/expr.hpp"
#include "linopen/numlin.hpp"
#include "linopen/sampling.hpp"
#include "linopen/system.hpp"

namespace linopen {

/// f(x,u) = g0(x) + sum_i gi(x) ui. fields[0] is the drift g0, fields[i] the
/// input field gi; each holds n control-free expressions.
struct ControlAffineForm {
  std::vector<std::vector<Expr>> fields;

  Vector field_at(std::size_t i, const Vector& x) const {
    return evaluate_components(fields[i], x, Vector());
  }
};

namespace detail {

// Coefficients of 1, u1..um; nullptr stands for an exact zero.
using AffineCoeffs = std::vector<Expr>;

inline Expr add_or(const Expr& a, const Expr& b) {
  if (!a) return b;
  if (!b) return a;
  return binary(NodeKind::add, a, b);
}

inline Expr sub_or(const Expr& a, const Expr& b) {
  if (!b) return a;
  if (!a) return negate(b);
  return binary(NodeKind::sub, a, b);
}

inline bool control_free(const AffineCoeffs& c) {
  for (std::size_t i = 1; i < c.size(); ++i) {
    if (c[i]) return false;
  }
  return true;
}

inline std::optional<AffineCoeffs> affine_split(const Expr& e, int m) {
  AffineCoeffs out(static_cast<std::size_t>(m) + 1);
  if (!mentions_control(*e)) {
    out[0] = e;
    return out;
  }
  switch (e->kind) {
    case NodeKind::control:
      out[static_cast<std::size_t>(e->index)] = constant(1.0);
      return out;
    case NodeKind::neg: {
      auto c = affine_split(e->children[0], m);
      if (!c) return std::nullopt;
      for (std::size_t i = 0; i < out.size(); ++i) {
        if ((*c)[i]) out[i] = negate((*c)[i]);
      }
      return out;
    }
    case NodeKind::add:
    case NodeKind::sub: {
      auto a = affine_split(e->children[0], m);
      auto b = affine_split(e->children[1], m);
      if (!a || !b) return std::nullopt;
      for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = e->kind == NodeKind::add ? add_or((*a)[i], (*b)[i]) : sub_or((*a)[i], (*b)[i]);
      }
      return out;
    }
    case NodeKind::mul: {
      auto a = affine_split(e->children[0], m);
      auto b = affine_split(e->children[1], m);
      if (!a || !b) return std::nullopt;
      const bool a_free = control_free(*a);
      if (!a_free && !control_free(*b)) return std::nullopt;  // ui*uj or ui^2
      const Expr& scale = a_free ? e->children[0] : e->children[1];
      const AffineCoeffs& other = a_free ? *b : *a;
      for (std::size_t i = 0; i < out.size(); ++i) {
        if (other[i]) {
          out[i] = a_free ? binary(NodeKind::mul, scale, other[i])
                          : binary(NodeKind::mul, other[i], scale);
        }
      }
      return out;
    }
    case NodeKind::div: {
      if (mentions_control(*e->children[1])) return std::nullopt;
      auto a = affine_split(e->children[0], m);
      if (!a) return std::nullopt;
      for (std::size_t i = 0; i < out.size(); ++i) {
        if ((*a)[i]) out[i] = binary(NodeKind::div, (*a)[i], e->children[1]);
      }
      return out;
    }
    case NodeKind::pow: {
      double p = exponent_of(*e);
      if (p == 1.0) return affine_split(e->children[0], m);
      if (p == 0.0) {
        out[0] = constant(1.0);
        return out;
      }
      return std::nullopt;
    }
    default:
      // Controls inside sin/cos/exp/tanh.
      return std::nullopt;
  }
}

}  // namespace detail

/// Structural control-affine decomposition, or nullopt when some component is
/// not affine in the controls.
inline std::optional<ControlAffineForm> detect_control_affine(const SystemSpec& system) {
  const auto n = static_cast<std::size_t>(system.n());
  const auto m = static_cast<std::size_t>(system.m());
  ControlAffineForm form;
  form.fields.assign(m + 1, std::vector<Expr>(n));
  for (std::size_t r = 0; r < n; ++r) {
    auto coeffs = detail::affine_split(system.components()[r], system.m());
    if (!coeffs) return std::nullopt;
    for (std::size_t i = 0; i <= m; ++i) {
      form.fields[i][r] = (*coeffs)[i] ? (*coeffs)[i] : constant(0.0);
    }
  }
  return form;
}

/// Numerical rank of [g_i(x_j)] over sampled x_j in the ball of `radius`
/// around `center`. Points where a field cannot be evaluated are skipped.
inline int span_dimension_estimate(const ControlAffineForm& form, const Vector& center,
                                   double radius, std::size_t samples,
                                   std::optional<double> tol = std::nullopt) {
  const Eigen::Index n = center.size();
  if (radius <= 0.0) throw PreconditionError("span_dimension_estimate: radius must be positive");
  if (samples < static_cast<std::size_t>(n)) {
    throw PreconditionError("span_dimension_estimate: need at least n samples");
  }
  std::vector<Vector> columns;
  for (std::size_t j = 0; j < samples; ++j) {
    Vector x = center + radius * sampling::ball_point(j, n);
    std::vector<Vector> at_point;
    try {
      for (std::size_t i = 0; i < form.fields.size(); ++i) at_point.push_back(form.field_at(i, x));
    } catch (const EvalError&) {
      continue;
    }
    columns.insert(columns.end(), at_point.begin(), at_point.end());
  }
  if (columns.empty()) return 0;
  Matrix G(n, static_cast<Eigen::Index>(columns.size()));
  for (std::size_t c = 0; c < columns.size(); ++c) G.col(static_cast<Eigen::Index>(c)) = columns[c];
  if (G.isZero(0.0)) return 0;
  return tol ? numerical_rank(G, *tol) : numerical_rank(G);
}

}  // namespace linopen
