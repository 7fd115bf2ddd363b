#pragma once

#include <stdexcept>
#include <string>

namespace transopt {

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand lengths disagree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Argument outside the mathematical domain of an operation (zero divisor,
/// negative square root, nonpositive metric, non-finite value, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Step index outside the range a schedule or sequence was declared for.
class RangeError : public Error {
 public:
  using Error::Error;
};

/// Operation called on an object in the wrong lifecycle state.
class StateError : public Error {
 public:
  using Error::Error;
};

/// Aux statistics required by a bound function were not supplied.
class MissingStatisticsError : public Error {
 public:
  using Error::Error;
};

/// Non-monotone step indices fed to a sequence-keyed accumulator.
class SequenceError : public Error {
 public:
  using Error::Error;
};

/// An internal invariant was violated; indicates a library bug.
class InvariantError : public Error {
 public:
  using Error::Error;
};

/// Malformed or invalid experiment configuration. The message names the key.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A run aborted mid-way (non-finite loss, ...).
class RunError : public Error {
 public:
  using Error::Error;
};

/// Runs handed to a comparison do not describe the same problem.
class ComparisonError : public Error {
 public:
  using Error::Error;
};

}  // namespace transopt
