#pragma once

#include <stdexcept>
#include <string>

namespace vprdb {

/// Invalid configuration or parameter values. CLI exit code 1.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& message) : std::runtime_error(message) {}
};

/// Missing, unreadable, or malformed input data. CLI exit code 2.
class InputError : public std::runtime_error {
 public:
  explicit InputError(const std::string& message) : std::runtime_error(message) {}
};

/// A broken internal invariant; indicates a bug, not bad input. CLI exit code 3.
class InternalError : public std::runtime_error {
 public:
  explicit InternalError(const std::string& message) : std::runtime_error(message) {}
};

}  // namespace vprdb
