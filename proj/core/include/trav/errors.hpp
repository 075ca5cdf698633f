#pragma once

#include <stdexcept>
#include <string>

namespace trav {

/// Malformed or inconsistent arguments (shape mismatch, too few samples, ...).
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A query outside the domain covered by the data (e.g. time outside a trajectory).
class RangeError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// Missing or unreadable files, corrupt records, mismatched frame sets.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A metric that has no value for the given input (e.g. single-class truth).
class UndefinedMetricError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Non-finite values during training or optimization.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Unknown config keys, bad override syntax, invalid values.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A checkpoint whose config differs from the requested one in guarded fields.
class ConfigMismatchError : public DataError {
 public:
  using DataError::DataError;
};

}  // namespace trav
