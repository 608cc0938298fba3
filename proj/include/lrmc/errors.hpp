#pragma once

#include <stdexcept>
#include <string>

namespace lrmc {

/// Base class for all errors raised by this library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A scalar argument is outside its documented domain.
class InvalidParameterError : public Error {
 public:
  using Error::Error;
};

/// Matrix/vector dimensions do not match the operation's contract.
class InvalidShapeError : public Error {
 public:
  using Error::Error;
};

/// Requested rank exceeds what the input admits, or a product is
/// rank-deficient where full rank is required.
class InvalidRankError : public Error {
 public:
  using Error::Error;
};

/// An iterative numerical scheme failed to produce a usable result.
class NumericalFailureError : public Error {
 public:
  using Error::Error;
};

/// A gram matrix in the scaled gradient step is singular or too
/// ill-conditioned to solve. `side()` names the offending factor.
class SingularFactorError : public NumericalFailureError {
 public:
  SingularFactorError(std::string side, const std::string& what)
      : NumericalFailureError(what), side_(std::move(side)) {}
  const std::string& side() const noexcept { return side_; }

 private:
  std::string side_;
};

/// The spectral initialization produced a rank-deficient factor pair.
class RankCollapseError : public NumericalFailureError {
 public:
  using NumericalFailureError::NumericalFailureError;
};

/// The run was configured inconsistently (e.g. a ground-truth stopping
/// rule without ground truth).
class ConfigurationError : public Error {
 public:
  using Error::Error;
};

/// A file could not be parsed; the message carries line/offset context.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// A finite (feedforward-only) schedule was asked for parameters past its
/// final layer. This doubles as the run-K-iterations stop condition.
class ScheduleExhaustedError : public ConfigurationError {
 public:
  using ConfigurationError::ConfigurationError;
};

/// Every point of a grid search evaluated to a non-finite objective.
class SearchFailureError : public NumericalFailureError {
 public:
  using NumericalFailureError::NumericalFailureError;
};

}  // namespace lrmc
