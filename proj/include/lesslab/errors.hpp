#pragma once

#include <stdexcept>
#include <string>

namespace lesslab {

// Error taxonomy. Config errors abort before any work starts, numeric errors
// abort a run in flight, shape/contract errors indicate caller bugs.

struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct ContractError : std::logic_error {
  using std::logic_error::logic_error;
};

struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace lesslab
