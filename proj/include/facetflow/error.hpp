#pragma once

#include <stdexcept>
#include <string>

namespace facetflow {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Two operands live on different grids.
class GridMismatch : public Error {
 public:
  using Error::Error;
};

/// Argument outside the operation's domain (negative radius, p = 0 on a
/// singular model, bad grid size, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Numerical refinement did not reach the requested tolerance.
class ToleranceError : public Error {
 public:
  ToleranceError(const std::string& what, double achieved)
      : Error(what), achieved_(achieved) {}
  double achieved() const { return achieved_; }

 private:
  double achieved_;
};

/// A stated precondition of an operation does not hold.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// Explicit time step exceeds the stability bound.
class CflViolation : public Error {
 public:
  using Error::Error;
};

/// Non-finite values, failed line searches, construction bound violations.
class NumericalFailure : public Error {
 public:
  using Error::Error;
};

/// Malformed scenario configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace facetflow
