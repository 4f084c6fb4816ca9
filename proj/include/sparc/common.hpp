#pragma once

#include <stdexcept>
#include <string>

namespace sparc {

/// Bad wiring: shape mismatches, unknown names, invalid configs.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Numerical failure during training (non-finite grads, bad actions).
struct TrainingError : std::runtime_error {
  explicit TrainingError(const std::string& msg) : std::runtime_error(msg) {}
};

/// API misuse: stale tapes, sampling from an undersized buffer, etc.
struct UsageError : std::runtime_error {
  explicit UsageError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace sparc
