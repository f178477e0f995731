#pragma once

#include <stdexcept>

namespace deblur {

// Bad argument values (negative sigma, non-positive radius, ...).
struct InvalidParameter : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Shape mismatches between images/operators/networks.
struct DimensionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// File and stream failures (missing files, malformed headers, short reads).
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Training loss became NaN/inf.
struct DivergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed or inconsistent run configuration.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace deblur
