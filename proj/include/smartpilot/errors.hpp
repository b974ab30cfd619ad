#pragma once

#include <stdexcept>
#include <string>

namespace smartpilot {

// Shape or dimension mismatch between tensors and layers.
struct DimensionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Non-finite values produced by a loss or gradient computation.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Caller supplied unusable input (empty data, inconsistent channels...).
struct InputError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// A structured document failed validation. The message lists every violation.
struct ValidationError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Unknown key (state, variable, product, prediction id...).
struct LookupError : std::out_of_range {
  using std::out_of_range::out_of_range;
};

struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct IngestionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace smartpilot
