/* errors.hpp -- exception types and the exit codes they map to */
#pragma once

#include <stdexcept>
#include <string>

namespace vicsek2p {

enum ExitCode : int {
  kExitOk = 0,
  kExitValidationFailed = 1,
  kExitConfigError = 2,
  kExitNumericalAbort = 3,
};

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
  virtual int exit_code() const { return kExitNumericalAbort; }
};

// bad argument values (non-finite, non-positive, ...)
struct DomainError : Error {
  using Error::Error;
  int exit_code() const override { return kExitConfigError; }
};

// argument outside the supported numerical range
struct RangeError : Error {
  using Error::Error;
  int exit_code() const override { return kExitConfigError; }
};

struct ConfigError : Error {
  using Error::Error;
  int exit_code() const override { return kExitConfigError; }
};

struct ParseError : ConfigError {
  using ConfigError::ConfigError;
};

// a user function returned garbage at a quadrature node
struct EvaluationError : Error {
  using Error::Error;
};

struct NumericalError : Error {
  using Error::Error;
};

struct PositivityError : NumericalError {
  using NumericalError::NumericalError;
};

struct SamplingError : NumericalError {
  using NumericalError::NumericalError;
};

// two computations of the same quantity disagree
struct ConsistencyError : NumericalError {
  using NumericalError::NumericalError;
};

}  // namespace vicsek2p
