#pragma once

#include <stdexcept>
#include <string>

namespace crnbo {

/// Violated precondition on user-supplied data (dimension mismatch, reserved seed, duplicate pair...).
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Covariance matrix could not be factorised, or a variance came out clearly negative.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Hyperparameter search produced no finite likelihood.
class FittingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace crnbo
