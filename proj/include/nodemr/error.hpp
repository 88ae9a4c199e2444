#pragma once

#include <stdexcept>
#include <string>

namespace nodemr {

/// Base of every error the library throws. The CLI maps subclasses to exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor extents that do not fit the operation.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A caller broke an operation's precondition.
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Invalid or infeasible configuration (bad flag value, unknown family, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Divergence, non-finite values, or a failed numeric tolerance.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Filesystem or format problems.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace nodemr
