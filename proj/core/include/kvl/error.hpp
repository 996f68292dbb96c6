// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace kvl {

/// Malformed or inconsistent user data: bad instance records, dimension
/// mismatches, unreadable checkpoints, diverged training runs.
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

/// Invalid configuration: dimensions that do not divide, empty layer stacks,
/// out-of-range hyperparameters.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace kvl
