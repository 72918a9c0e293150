#pragma once

#include <stdexcept>
#include <string>

namespace eattn {

/// Operand shapes do not fit the operation.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// An exponential energy argument left the representable range.
class OverflowError : public std::overflow_error {
 public:
  using std::overflow_error::overflow_error;
};

/// A NaN or infinity showed up where a finite value is required.
class NonFiniteError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Invalid configuration value (descent parameters, head dimensions, CLI config).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace eattn
