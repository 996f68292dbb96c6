// SPDX-License-Identifier: Apache-2.0
#include "kvl/metrics.hpp"

#include <atomic>
#include <map>
#include <thread>

namespace kvl {

std::optional<double> EvalMetrics::acc_qa() const {
  if (n_qa == 0) return std::nullopt;
  return static_cast<double>(correct_qa) / static_cast<double>(n_qa);
}

std::optional<double> EvalMetrics::acc_qar_given() const {
  if (n_qar == 0) return std::nullopt;
  return static_cast<double>(correct_qar) / static_cast<double>(n_qar);
}

std::optional<double> EvalMetrics::acc_joint() const {
  if (n_pairs == 0) return std::nullopt;
  return static_cast<double>(both_correct) / static_cast<double>(n_pairs);
}

EvalMetrics aggregate_metrics(const std::vector<PredictionRecord>& records) {
  EvalMetrics m;
  struct PairState {
    bool has_qa = false, has_qar = false;
    bool qa_correct = false, qar_correct = false;
  };
  std::map<std::int64_t, PairState> pairs;
  for (const PredictionRecord& rec : records) {
    PairState& state = pairs[rec.id];
    if (rec.mode == TaskMode::QToA) {
      ++m.n_qa;
      m.correct_qa += rec.correct ? 1 : 0;
      if (!state.has_qa) {  // first record of a mode represents the id
        state.has_qa = true;
        state.qa_correct = rec.correct;
      }
    } else {
      ++m.n_qar;
      m.correct_qar += rec.correct ? 1 : 0;
      if (!state.has_qar) {
        state.has_qar = true;
        state.qar_correct = rec.correct;
      }
    }
  }
  for (const auto& [id, state] : pairs) {
    if (state.has_qa && state.has_qar) {
      ++m.n_pairs;
      m.both_correct += (state.qa_correct && state.qar_correct) ? 1 : 0;
    } else {
      ++m.n_unpaired;
    }
  }
  return m;
}

EvalMetrics evaluate(const std::vector<Instance>& instances,
                     const ModelParams& params, const Vocab& vocab,
                     const KnowledgeBase& kb, const ScoreOptions& options,
                     int threads, const Stoplist& stoplist) {
  std::vector<PredictionRecord> records(instances.size());
  auto run_range = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const Instance& inst = instances[i];
      const ScoreVector sv = predict(inst, params, vocab, kb, options, stoplist);
      records[i] = PredictionRecord{inst.id, inst.mode, sv.argmax == inst.gold};
    }
  };
  if (threads <= 1 || instances.size() < 2) {
    run_range(0, instances.size());
  } else {
    const std::size_t workers =
        std::min<std::size_t>(static_cast<std::size_t>(threads), instances.size());
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> failures(workers);
    pool.reserve(workers);
    const std::size_t chunk = (instances.size() + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
      const std::size_t begin = w * chunk;
      const std::size_t end = std::min(instances.size(), begin + chunk);
      if (begin >= end) break;
      pool.emplace_back([&, w, begin, end] {
        try {
          run_range(begin, end);
        } catch (...) {
          failures[w] = std::current_exception();
        }
      });
    }
    for (std::thread& t : pool) t.join();
    for (const std::exception_ptr& failure : failures) {
      if (failure) std::rethrow_exception(failure);
    }
  }
  return aggregate_metrics(records);
}

}  // namespace kvl
