#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace aismlmc {

/// Violated precondition on a public entry point.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A simulated state, weight or gradient sample left the finite range.
///
/// `step()` is the Euler step (1-based) at which the state became non-finite,
/// or 0 when the failure is not tied to a time step (weights, gradients).
class NumericalOverflow : public std::overflow_error {
 public:
  explicit NumericalOverflow(const std::string& what, std::int64_t step = 0)
      : std::overflow_error(what), step_(step) {}

  std::int64_t step() const noexcept { return step_; }

 private:
  std::int64_t step_;
};

/// Oracle could not separate a bias from Monte Carlo noise.
class InsufficientResolution : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require(bool condition, const std::string& message) {
  if (!condition) {
    throw InvalidArgument(message);
  }
}

}  // namespace aismlmc
