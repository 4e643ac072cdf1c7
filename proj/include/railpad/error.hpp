#pragma once

#include <stdexcept>
#include <string>

namespace railpad {

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input violates an operation precondition (empty, constant, out of range).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Input is well-formed but numerically degenerate (all zeros, no extrema,
/// rank-deficient Hankel matrix, zero variance...).
class DegenerateInput : public Error {
 public:
  using Error::Error;
};

/// A file or record could not be parsed or is inconsistent.
class DataError : public Error {
 public:
  using Error::Error;
};

/// An iterative estimator did not reach a usable solution.
class EstimationError : public Error {
 public:
  using Error::Error;
};

/// Bad configuration (CLI / pipeline level).
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace railpad
