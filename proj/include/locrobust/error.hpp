#pragma once

#include <stdexcept>
#include <string>

namespace locrobust {

/// Bad input: wrong dimensions, invalid parameters, malformed configuration.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A numerical procedure failed on otherwise valid input.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The whitened projected Hessian has no positive eigenvalue, so no
/// deviation from the reference model is detectable and epsilon is unbounded.
class UnboundedEpsilonError : public NumericalError {
 public:
  UnboundedEpsilonError()
      : NumericalError("no detectable deviation directions; epsilon is unbounded") {}
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw ValidationError(msg);
}

}  // namespace locrobust
