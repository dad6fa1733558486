#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace linopen {

/// Malformed expression or system file. `offset` is a byte offset into the
/// offending text; `line` is 1-based when the text came from a file, 0 otherwise.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t offset, std::size_t line = 0)
      : std::runtime_error(what), offset_(offset), line_(line) {}

  std::size_t offset() const noexcept { return offset_; }
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t offset_;
  std::size_t line_;
};

/// Well-formed input that violates a semantic constraint (dimensions,
/// variable indices, equilibrium residual).
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Division by zero or a non-finite result while evaluating the vector field.
class EvalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A dense kernel failed to converge or hit the desk-scale cap.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An operation was asked to run outside its precondition, e.g. pole placement
/// on an uncontrollable pair.
class PreconditionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace linopen
