#pragma once

#include <stdexcept>
#include <string>

namespace sublr {

/// Operand shapes do not agree.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A documented precondition on a scalar argument or structure failed.
class DomainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Singular systems, non-SPD covariances, solver divergence.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require_dims(bool ok, const std::string& what) {
  if (!ok) throw DimensionError(what);
}

inline void require(bool ok, const std::string& what) {
  if (!ok) throw DomainError(what);
}

}  // namespace sublr
