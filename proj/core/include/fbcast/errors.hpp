#pragma once

#include <stdexcept>
#include <string>

namespace fbcast {

// Invalid argument shapes, values or file contents.
class RejectedInputError : public std::invalid_argument {
 public:
  explicit RejectedInputError(const std::string& what)
      : std::invalid_argument(what) {}
};

// Matrix inversion hit a pivot below the singularity threshold.
class SingularMatrixError : public std::runtime_error {
 public:
  explicit SingularMatrixError(const std::string& what)
      : std::runtime_error(what) {}
};

// Chain has no absorbing state, or some transient state cannot reach one.
class NotAbsorbingError : public std::runtime_error {
 public:
  explicit NotAbsorbingError(const std::string& what)
      : std::runtime_error(what) {}
};

// Conditional absorption reward requested for an unreachable absorbing state.
class UnreachableAbsorptionError : public std::runtime_error {
 public:
  explicit UnreachableAbsorptionError(const std::string& what)
      : std::runtime_error(what) {}
};

class InfeasibleError : public std::runtime_error {
 public:
  explicit InfeasibleError(const std::string& what)
      : std::runtime_error(what) {}
};

class UnboundedError : public std::runtime_error {
 public:
  explicit UnboundedError(const std::string& what)
      : std::runtime_error(what) {}
};

// Iterative solver failed to converge; diagnostic, not expected in range.
class NumericFailureError : public std::runtime_error {
 public:
  explicit NumericFailureError(const std::string& what)
      : std::runtime_error(what) {}
};

}  // namespace fbcast
