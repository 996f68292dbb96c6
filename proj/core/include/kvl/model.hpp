// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "kvl/embedding.hpp"
#include "kvl/encoder.hpp"
#include "kvl/instance.hpp"
#include "kvl/kb.hpp"
#include "kvl/sequence.hpp"

namespace kvl {

/// Every trainable tensor: embedding tables, encoder blocks, and the linear
/// scoring head read off the [CLS] row.
struct ModelParams {
  ModelConfig config;
  EmbedTables tables;
  std::vector<LayerParams> layers;
  Eigen::VectorXd head_w;  // d
  double head_b = 0.0;
};

/// Embedding tables at uniform(-0.02, 0.02), encoder blocks at Xavier-uniform
/// with zero biases and unit layer-norm gains, zero scoring head (so initial
/// scores are exactly 0).
ModelParams init_params(const ModelConfig& config, int vocab_rows,
                        std::uint64_t seed);

ModelParams zeros_like(const ModelParams& params);

/// Flat view over one tensor's storage, used by the optimizer, the
/// checkpoint writer, and the finite-difference checks.
struct TensorView {
  std::string name;
  double* data = nullptr;
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;

  Eigen::Index size() const { return rows * cols; }
};

/// All tensors of a parameter set in a stable, documented order.
std::vector<TensorView> tensor_views(ModelParams& params);

/// Number of scalar parameters.
std::int64_t parameter_count(ModelParams& params);

struct ScoreOptions {
  std::size_t k = 2;
  PositionMode position_mode = PositionMode::Relative;
  bool mask_off = false;  // replace the visible matrix with all-true
};

/// Class scores for the four candidates, their softmax, and the argmax
/// (ties broken toward the first index).
struct ScoreVector {
  std::array<double, 4> scores{};
  std::array<double, 4> probs{};
  int argmax = 0;
};

ScoreVector score_vector_from(const std::array<double, 4>& scores);

/// Enriched sequence for one query/candidate pair of an instance.
EnrichedSequence assemble_instance(const Instance& instance, int candidate,
                                   const KnowledgeBase& kb,
                                   const ScoreOptions& options,
                                   const ModelConfig& config,
                                   const Stoplist& stoplist = default_stoplist());

/// Score of an already-assembled sequence: embed, encode, read the [CLS] row
/// through the linear head. `tape`/`input`/`seq_out` retain what the
/// training loop needs for the backward pass.
double score_sequence(const EnrichedSequence& seq, const ModelParams& params,
                      const Vocab& vocab, bool mask_off,
                      ForwardTape* tape = nullptr,
                      Eigen::MatrixXd* cls_hidden = nullptr);

/// assemble + score for one candidate. Pipeline and embedding rejections are
/// re-raised with the instance id attached.
double score_pair(const Instance& instance, int candidate,
                  const ModelParams& params, const Vocab& vocab,
                  const KnowledgeBase& kb, const ScoreOptions& options,
                  const Stoplist& stoplist = default_stoplist());

/// Scores all four candidates of an instance.
ScoreVector predict(const Instance& instance, const ModelParams& params,
                    const Vocab& vocab, const KnowledgeBase& kb,
                    const ScoreOptions& options,
                    const Stoplist& stoplist = default_stoplist());

}  // namespace kvl
