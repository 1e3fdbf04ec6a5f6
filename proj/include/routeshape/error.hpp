#pragma once

#include <stdexcept>
#include <string>

namespace routeshape {

/// Invalid scenario, run config, or call arguments.
class ConfigError : public std::invalid_argument {
 public:
  explicit ConfigError(const std::string& what) : std::invalid_argument(what) {}
};

/// Runtime contract violation (e.g. a policy picked a route it does not own).
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace routeshape
