#pragma once

#include <stdexcept>
#include <string>

namespace wireguide {

/// Raised when an input violates a documented invariant.
class ValidationError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

/// Raised when a side trap cannot be formed for the requested wire and bias.
class NoSideTrapError : public ValidationError {
  public:
    using ValidationError::ValidationError;
};

/// Raised when a trajectory leaves the finite numbers.
class NumericalError : public std::runtime_error {
  public:
    NumericalError(const std::string& what, double last_valid_time)
        : std::runtime_error(what), last_valid_time_(last_valid_time) {}

    double last_valid_time() const noexcept { return last_valid_time_; }

  private:
    double last_valid_time_;
};

}  // namespace wireguide
