#pragma once

#include <stdexcept>
#include <string>

namespace confflow {

// Bad input data or violated precondition (maps to CLI exit code 2 when
// raised during configuration, 3 when raised mid-computation).
struct config_error : std::runtime_error {
  explicit config_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Numerical failure: quadrature cross-checks out of tolerance, search window
// exhausted, solver divergence.  Maps to CLI exit code 3.
struct numeric_error : std::runtime_error {
  explicit numeric_error(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace confflow
