#pragma once

#include <stdexcept>

namespace frontcast {

// Error taxonomy mirrors the CLI exit codes: config 2, data 3, numeric 4.

/// Invalid configuration or parameters (bad ranges, incompatible options).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent input data (files, CSV rows, year gaps).
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Numerical failure (zero variance, divergence, non-finite values).
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace frontcast
