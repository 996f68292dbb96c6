// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

#include "kvl/error.hpp"

namespace kvl {

/// Encoder and embedding dimensions. Defaults are the desk-scale setup used
/// throughout the tests; position table rows equal max_seq.
struct ModelConfig {
  int d = 64;        // hidden width; divisible by heads and by 8
  int heads = 4;     // attention heads
  int layers = 2;    // encoder blocks
  int d_ff = 128;    // feed-forward inner width
  int d_app = 16;    // appearance feature dimension
  int max_seq = 128; // maximum sequence length and position table rows

  void validate() const {
    if (d <= 0 || heads <= 0 || layers <= 0 || d_ff <= 0 || d_app <= 0 ||
        max_seq <= 0) {
      throw ConfigError("model dimensions must be positive");
    }
    if (d % heads != 0) {
      throw ConfigError("hidden width " + std::to_string(d) +
                        " is not divisible by heads " + std::to_string(heads));
    }
    if (d % 8 != 0) {
      throw ConfigError("hidden width " + std::to_string(d) +
                        " is not divisible by 8 (geometry lift needs d/8 "
                        "frequencies per coordinate)");
    }
  }
};

}  // namespace kvl
