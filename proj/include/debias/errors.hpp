#pragma once

#include <stdexcept>
#include <string>

namespace debias {

// Invalid configuration values, shape mismatches between components, and
// violated preconditions on operation arguments.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Malformed or inconsistent datasets, including parse failures in tabular
// files (the message carries the line and column).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite losses or gradients encountered during optimization.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace debias
