#pragma once

#include <stdexcept>
#include <string>

namespace zkstar {

/// Shape or precision incompatibility between operands.
struct DimensionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Fixed-point overflow (raw magnitude would exceed the representable range).
struct RangeError : std::range_error {
  using std::range_error::range_error;
};

/// Innovation covariance too ill-conditioned to solve for the Kalman gain.
struct SingularInnovation : std::runtime_error {
  double condition;
  SingularInnovation(const std::string& msg, double cond)
      : std::runtime_error(msg), condition(cond) {}
};

/// Witness bytes that fail to decode (bad nonce framing, kappa outside {0,1},
/// psf or shape disagreement).
struct MalformedWitness : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Claimed kernel outputs disagree with re-execution at prove time.
struct ReexecutionMismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Proving key does not bind the circuit/parameters it was asked to prove.
struct KeyMismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Witness bundle fell out of the retention window.
struct WitnessExpired : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Model load/fit failures (bad weights file, insufficient data, divergence).
struct ModelError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace zkstar
