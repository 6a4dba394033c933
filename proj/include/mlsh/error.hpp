#pragma once

#include <stdexcept>
#include <string>

namespace mlsh {

// A caller broke a documented precondition.
struct ContractError : std::logic_error {
  using std::logic_error::logic_error;
};

// Bad user-facing configuration (unknown preset, malformed key, ...).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Non-finite values where finite math was required (NaN loss or gradient).
struct NumericsError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw ContractError(msg);
}

}  // namespace mlsh
