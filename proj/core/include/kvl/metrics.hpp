// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "kvl/model.hpp"

namespace kvl {

/// Outcome of predicting one instance.
struct PredictionRecord {
  std::int64_t id = 0;
  TaskMode mode = TaskMode::QToA;
  bool correct = false;
};

/// The three accuracies: answers, rationales given the answer, and the joint
/// metric over ids that carry one record of each mode (a pair counts only
/// when both predictions are correct; unpaired ids are excluded and counted).
struct EvalMetrics {
  std::size_t n_qa = 0;
  std::size_t n_qar = 0;
  std::size_t correct_qa = 0;
  std::size_t correct_qar = 0;
  std::size_t n_pairs = 0;
  std::size_t both_correct = 0;
  std::size_t n_unpaired = 0;

  std::optional<double> acc_qa() const;
  std::optional<double> acc_qar_given() const;
  std::optional<double> acc_joint() const;
};

EvalMetrics aggregate_metrics(const std::vector<PredictionRecord>& records);

/// Predict every instance and aggregate. `threads` > 1 fans instances out
/// over worker threads against the shared read-only parameters; the counts
/// are order-independent, so the result is deterministic either way.
EvalMetrics evaluate(const std::vector<Instance>& instances,
                     const ModelParams& params, const Vocab& vocab,
                     const KnowledgeBase& kb, const ScoreOptions& options,
                     int threads = 1,
                     const Stoplist& stoplist = default_stoplist());

}  // namespace kvl
