#pragma once

#include <stdexcept>
#include <string>

namespace hicd {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Incompatible tensor or image extents.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Out-of-range or inconsistent argument values.
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// Operation invoked on an object in the wrong state (e.g. sampling an empty bank).
class StateError : public Error {
 public:
  using Error::Error;
};

/// Violated call contract (e.g. backward on a non-scalar).
class ContractViolation : public Error {
 public:
  using Error::Error;
};

/// A function produced a non-finite value where a finite one was required.
class EvaluationError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace hicd
