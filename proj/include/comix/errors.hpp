#pragma once

#include <stdexcept>
#include <string>

namespace comix {

// Bad configuration or malformed input files.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// A caller broke a documented precondition (wrong shapes, out-of-range
// action index, inconsistent mask indexing).
class ContractViolation : public std::logic_error {
 public:
  explicit ContractViolation(const std::string& msg) : std::logic_error(msg) {}
};

// Numerical failure that aborts an optimization step.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace comix
