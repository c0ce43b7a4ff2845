#pragma once

#include <stdexcept>
#include <string>

namespace ovs {

/// Base of all toolkit errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A numeric precondition of an operation does not hold (grid ratios,
/// span lengths, gain floors, missing crossings).
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// Bad configuration: malformed file, unknown key, invalid parameter set.
class ConfigError : public Error {
 public:
  using Error::Error;
};

class GridMismatchError : public PreconditionError {
 public:
  using PreconditionError::PreconditionError;
};

/// Not enough samples to determine the requested number of unknowns.
class SpanTooShortError : public PreconditionError {
 public:
  using PreconditionError::PreconditionError;
};

class DetectionError : public PreconditionError {
 public:
  using PreconditionError::PreconditionError;
};

class FitDomainError : public PreconditionError {
 public:
  using PreconditionError::PreconditionError;
};

class UnusableReferenceError : public PreconditionError {
 public:
  using PreconditionError::PreconditionError;
};

class GeometryError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace ovs
