#pragma once

#include <stdexcept>
#include <string>

namespace cassi {

/// Raised when operand shapes are inconsistent with each other or with a model.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a parameter violates an operation's precondition.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a numerical procedure cannot produce a trustworthy result
/// (rank-deficient normal matrix, CG non-convergence in strict mode, ...).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace cassi
