// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <iosfwd>
#include <string>

#include "kvl/embedding.hpp"
#include "kvl/model.hpp"

namespace kvl {

/// Single-file parameter checkpoint: one JSON header line (model config,
/// vocabulary surfaces, tensor names and shapes) followed by every tensor as
/// little-endian 32-bit floats in header order, column-major within a tensor.
struct Checkpoint {
  ModelParams params;
  Vocab vocab;
};

void save_checkpoint(const ModelParams& params, const Vocab& vocab,
                     std::ostream& out);
void save_checkpoint_file(const ModelParams& params, const Vocab& vocab,
                          const std::string& path);

Checkpoint load_checkpoint(std::istream& in);
Checkpoint load_checkpoint_file(const std::string& path);

}  // namespace kvl
