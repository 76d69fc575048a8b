#pragma once

#include <stdexcept>
#include <string>

namespace storecycle {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Failures caused by the caller's inputs (bad files, invalid parameters).
/// The CLI maps these to exit code 1.
class InputError : public Error {
 public:
  using Error::Error;
};

/// Failures of a numerical procedure on otherwise valid inputs.
/// The CLI maps these to exit code 2.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public InputError {
 public:
  using InputError::InputError;
};

class InsufficientData : public InputError {
 public:
  using InputError::InputError;
};

class UnfillableGap : public InputError {
 public:
  using InputError::InputError;
};

class DomainError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class QuadratureError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class NonConvergence : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// More than one optimal supply decision survived the ordering rule.
class DominanceViolation : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// The cash flow density is already below the shutdown threshold at opening.
class NeverOpens : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class FixedPointDivergence : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class NoPeak : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class RankDeficient : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class OptimizerDivergence : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace storecycle
