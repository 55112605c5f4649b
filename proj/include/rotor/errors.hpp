#pragma once

#include <stdexcept>
#include <string>

namespace rotor {

/// Base class for every error raised by the simulator.
class RotorError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Support of a state or density would leave the truncated ladder window.
class TruncationError : public RotorError {
 public:
  using RotorError::RotorError;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public RotorError {
 public:
  using RotorError::RotorError;
};

/// Query point outside a sampled support (e.g. a PSD lookup).
class RangeError : public RotorError {
 public:
  using RotorError::RotorError;
};

/// Not enough data for a spectral estimate.
class InsufficientLengthError : public RotorError {
 public:
  using RotorError::RotorError;
};

/// Integrator invariant (trace, Hermiticity, positivity) drifted past tolerance.
class StabilityError : public RotorError {
 public:
  using RotorError::RotorError;
};

/// Pure-state norm drifted past tolerance during a stochastic trajectory.
class NormDriftError : public RotorError {
 public:
  using RotorError::RotorError;
};

}  // namespace rotor
