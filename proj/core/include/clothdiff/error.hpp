#pragma once

#include <stdexcept>
#include <string>

namespace clothdiff {

// Bad user input: malformed configs, unknown keys, incompatible files.
// The CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Precondition violations on operations (empty point set, index out of
// range, mismatched vertex counts, ...).
class DomainError : public std::runtime_error {
 public:
  explicit DomainError(const std::string& msg) : std::runtime_error(msg) {}
};

// Runtime numerical failure: NaN/Inf in simulation forces, diverging loss,
// NaN in sampled model output. The CLI maps this to exit code 3.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace clothdiff
