#pragma once

#include <stdexcept>
#include <string>

namespace nlbound {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed configuration text; the message names the offending key.
class ConfigError : public Error {
 public:
  ConfigError(const std::string& key, const std::string& what)
      : Error("config key '" + key + "': " + what), key_(key) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

/// Structurally valid input that violates a model invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// Singular or otherwise degenerate matrix data (W(t) losing rank, etc.).
class DegeneracyError : public Error {
 public:
  using Error::Error;
};

/// Operation requested on an input it does not cover.
class UnsupportedError : public Error {
 public:
  using Error::Error;
};

/// Numerical failure inside the ODE integrator.
class IntegrationError : public Error {
 public:
  enum class Kind { StepUnderflow, NonFinite, StepLimit };

  IntegrationError(Kind kind, double time, const std::string& what)
      : Error(what), kind_(kind), time_(time) {}
  Kind kind() const { return kind_; }
  /// Last time the integrator reached before failing.
  double time() const { return time_; }

 private:
  Kind kind_;
  double time_;
};

/// A bisection search whose bracket does not satisfy its preconditions.
class BracketError : public Error {
 public:
  using Error::Error;
};

}  // namespace nlbound
