#pragma once

#include <stdexcept>
#include <string>

namespace lrpr {

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not agree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Invalid ensemble, experiment or solver configuration.
class ConfigurationError : public Error {
 public:
  using Error::Error;
};

/// Row partition into init and fresh measurements does not add up.
class PartitionError : public Error {
 public:
  using Error::Error;
};

/// NaN/Inf encountered or an iteration broke down.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// A least-squares system is singular.
class RankDeficiencyError : public Error {
 public:
  using Error::Error;
};

/// Threshold rank estimation found no eigenvalue above the noise floor.
class NoSignalError : public Error {
 public:
  using Error::Error;
};

/// Input violates a documented precondition (e.g. non-orthonormal basis).
class ContractViolation : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace lrpr
