#pragma once

#include <stdexcept>
#include <string>

namespace klmpc {

/// Bad user input: config schema, dimension mismatches, missing artifacts.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Computation failed: divergence, rank deficiency, spectral degeneracy.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A lifted state was handed to a controller outside its certified region.
class OutsideStabilityRegionError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace klmpc
