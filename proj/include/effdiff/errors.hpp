#pragma once

#include <stdexcept>
#include <string>

namespace effdiff {

/// Invalid user-facing configuration (grid bounds, parameters, missing inputs).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A computation left the representable range (overflowing diffusion,
/// singular collective variable, non-finite energies).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The collective variable has a vanishing gradient at the requested point.
class SingularCvError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace effdiff
