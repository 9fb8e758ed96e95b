#pragma once

#include <stdexcept>
#include <string>

namespace cusp {

class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Argument outside the operation's domain (x beyond the reachable range,
/// grid escaping Θ, kappa >= 1/2 for the cusp integral, ...).
class DomainError : public Error {
public:
  using Error::Error;
};

/// Two paths (or a path and a Wiener path) that do not share a time grid.
class ShapeError : public Error {
public:
  using Error::Error;
};

/// h evaluated to a non-finite value.
class InvalidFunctionError : public Error {
public:
  using Error::Error;
};

/// Internal numerical failure: non-monotone ODE path, failed factorization.
class NumericalError : public Error {
public:
  using Error::Error;
};

class ConfigError : public Error {
public:
  using Error::Error;
};

/// Too many limit-law samples carry Z-mass near the grid edges.
class GridTooSmallError : public Error {
public:
  using Error::Error;
};

/// More than 1% of the replicates at one noise level failed.
class ExperimentAborted : public Error {
public:
  using Error::Error;
};

}  // namespace cusp
