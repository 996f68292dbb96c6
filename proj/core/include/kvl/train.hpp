// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "kvl/metrics.hpp"
#include "kvl/model.hpp"

namespace kvl {

/// SGD with momentum and weight decay over the 4-way softmax cross-entropy
/// of the candidate scores. Defaults follow the reference recipe downscaled
/// to desk size.
struct TrainConfig {
  int epochs = 20;
  int batch_size = 8;
  double learning_rate = 5e-3;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  std::uint64_t seed = 0;
  ScoreOptions score;     // k, position mode, mask toggle
  int eval_threads = 1;   // fan-out for the per-epoch evaluation only

  void validate() const;
};

struct EpochRecord {
  int epoch = 0;
  double loss = 0.0;  // mean training cross-entropy over the epoch
  EvalMetrics metrics;
};

struct TrainResult {
  ModelParams params;
  std::vector<EpochRecord> log;
};

/// One epoch record as its canonical JSONL line (no trailing newline):
/// {"epoch", "loss", "acc_QA", "acc_QAR_given", "acc_joint"} with null for
/// metrics that have no instances.
std::string epoch_record_to_json_line(const EpochRecord& record);

/// Deterministic training run: instance order, parameter initialization, and
/// updates all derive from the seed. Per-epoch metrics are computed on
/// `eval_set` when non-empty, otherwise on the training set, and streamed to
/// `log_stream` as JSONL when given. Throws DataError if the loss stops
/// being finite.
TrainResult train(const std::vector<Instance>& train_set,
                  const std::vector<Instance>& eval_set,
                  const ModelConfig& model_config, const TrainConfig& config,
                  const Vocab& vocab, const KnowledgeBase& kb,
                  std::ostream* log_stream = nullptr,
                  const Stoplist& stoplist = default_stoplist());

/// Mean 4-way cross-entropy of a parameter set over a dataset, no updates.
double mean_loss(const std::vector<Instance>& instances,
                 const ModelParams& params, const Vocab& vocab,
                 const KnowledgeBase& kb, const ScoreOptions& options,
                 const Stoplist& stoplist = default_stoplist());

}  // namespace kvl
