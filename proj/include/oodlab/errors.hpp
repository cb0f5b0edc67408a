#pragma once

#include <stdexcept>
#include <string>

namespace oodlab {

// Input/format problems (bad manifests, malformed CSV, inconsistent shapes).
// The CLI maps these to exit code 2.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Numerical failures (non-finite gradients, singular systems, diverged loops).
// The CLI maps these to exit code 3.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace oodlab
