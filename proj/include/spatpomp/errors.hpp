#pragma once

#include <stdexcept>
#include <string>

namespace spatpomp {

/// Input failed validation (bad parameter, malformed neighborhood, ...).
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Data layout problem, e.g. a ragged observation grid.
class StructuralError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// A method needs a model component the model does not provide.
class CapabilityError : public std::runtime_error {
 public:
  CapabilityError(const std::string& method, const std::string& component)
      : std::runtime_error(method + " requires model component '" + component + "'"),
        component_(component) {}
  const std::string& component() const noexcept { return component_; }

 private:
  std::string component_;
};

class LinearAlgebraError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// All resampling weights were zero.
class ResamplingFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IntegrationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace spatpomp
