// SPDX-License-Identifier: Apache-2.0
#include "kvl/train.hpp"

#include <cmath>
#include <numeric>
#include <ostream>
#include <thread>

#include <nlohmann/json.hpp>

#include "kvl/error.hpp"
#include "kvl/rng.hpp"

namespace kvl {

using nlohmann::json;

namespace {

struct PreparedInstance {
  const Instance* instance = nullptr;
  std::array<EnrichedSequence, 4> sequences;
};

/// Token layouts do not change across epochs, so retrieval and assembly run
/// once up front.
std::vector<PreparedInstance> prepare(const std::vector<Instance>& instances,
                                      const KnowledgeBase& kb,
                                      const ScoreOptions& options,
                                      const ModelConfig& config,
                                      const Stoplist& stoplist) {
  std::vector<PreparedInstance> prepared(instances.size());
  for (std::size_t i = 0; i < instances.size(); ++i) {
    prepared[i].instance = &instances[i];
    for (int c = 0; c < 4; ++c) {
      try {
        prepared[i].sequences[static_cast<std::size_t>(c)] =
            assemble_instance(instances[i], c, kb, options, config, stoplist);
      } catch (const DataError& e) {
        throw DataError("instance " + std::to_string(instances[i].id) + ": " +
                        e.what());
      }
    }
  }
  return prepared;
}

std::array<double, 4> forward_scores(const PreparedInstance& prep,
                                     const ModelParams& params,
                                     const Vocab& vocab, bool mask_off,
                                     std::array<ForwardTape, 4>* tapes,
                                     std::array<Eigen::MatrixXd, 4>* hiddens) {
  std::array<double, 4> scores{};
  for (int c = 0; c < 4; ++c) {
    const auto ci = static_cast<std::size_t>(c);
    scores[ci] = score_sequence(prep.sequences[ci], params, vocab, mask_off,
                                tapes ? &(*tapes)[ci] : nullptr,
                                hiddens ? &(*hiddens)[ci] : nullptr);
  }
  return scores;
}

EvalMetrics evaluate_prepared(const std::vector<PreparedInstance>& prepared,
                              const ModelParams& params, const Vocab& vocab,
                              bool mask_off, int threads) {
  std::vector<PredictionRecord> records(prepared.size());
  auto run_range = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const ScoreVector sv = score_vector_from(
          forward_scores(prepared[i], params, vocab, mask_off, nullptr, nullptr));
      records[i] = PredictionRecord{prepared[i].instance->id,
                                    prepared[i].instance->mode,
                                    sv.argmax == prepared[i].instance->gold};
    }
  };
  if (threads <= 1 || prepared.size() < 2) {
    run_range(0, prepared.size());
  } else {
    const std::size_t workers =
        std::min<std::size_t>(static_cast<std::size_t>(threads), prepared.size());
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> failures(workers);
    const std::size_t chunk = (prepared.size() + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
      const std::size_t begin = w * chunk;
      const std::size_t end = std::min(prepared.size(), begin + chunk);
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

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 0) throw ConfigError("epochs must be non-negative");
  if (batch_size <= 0) throw ConfigError("batch size must be positive");
  if (learning_rate <= 0.0) throw ConfigError("learning rate must be positive");
  if (momentum < 0.0 || momentum >= 1.0) {
    throw ConfigError("momentum must be in [0, 1)");
  }
  if (weight_decay < 0.0) throw ConfigError("weight decay must be non-negative");
}

std::string epoch_record_to_json_line(const EpochRecord& record) {
  auto opt = [](const std::optional<double>& v) {
    return v ? json(*v) : json(nullptr);
  };
  const json j{{"epoch", record.epoch},
               {"loss", record.loss},
               {"acc_QA", opt(record.metrics.acc_qa())},
               {"acc_QAR_given", opt(record.metrics.acc_qar_given())},
               {"acc_joint", opt(record.metrics.acc_joint())}};
  return j.dump();
}

TrainResult train(const std::vector<Instance>& train_set,
                  const std::vector<Instance>& eval_set,
                  const ModelConfig& model_config, const TrainConfig& config,
                  const Vocab& vocab, const KnowledgeBase& kb,
                  std::ostream* log_stream, const Stoplist& stoplist) {
  model_config.validate();
  config.validate();
  if (train_set.empty()) throw DataError("training set is empty");

  const auto prepared_train =
      prepare(train_set, kb, config.score, model_config, stoplist);
  const auto prepared_eval =
      prepare(eval_set, kb, config.score, model_config, stoplist);
  const auto& metric_pool = prepared_eval.empty() ? prepared_train : prepared_eval;

  TrainResult result;
  result.params = init_params(model_config, vocab.rows(), config.seed);
  ModelParams grads = zeros_like(result.params);
  ModelParams velocity = zeros_like(result.params);
  auto param_views = tensor_views(result.params);
  auto grad_views = tensor_views(grads);
  auto velocity_views = tensor_views(velocity);

  Rng order_rng = Rng(config.seed).fork();
  std::vector<std::size_t> order(prepared_train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    shuffle(order, order_rng);
    double epoch_loss = 0.0;

    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t stop = std::min(
          order.size(), start + static_cast<std::size_t>(config.batch_size));
      const double inv_batch = 1.0 / static_cast<double>(stop - start);
      for (const TensorView& view : grad_views) {
        std::fill(view.data, view.data + view.size(), 0.0);
      }

      for (std::size_t pos = start; pos < stop; ++pos) {
        const PreparedInstance& prep = prepared_train[order[pos]];
        std::array<ForwardTape, 4> tapes;
        std::array<Eigen::MatrixXd, 4> hiddens;
        const ScoreVector sv = score_vector_from(
            forward_scores(prep, result.params, vocab, config.score.mask_off,
                           &tapes, &hiddens));
        const int gold = prep.instance->gold;
        const double loss = -std::log(sv.probs[static_cast<std::size_t>(gold)]);
        if (!std::isfinite(loss)) {
          throw DataError("training diverged: loss is not finite at epoch " +
                          std::to_string(epoch) + " (instance " +
                          std::to_string(prep.instance->id) + ")");
        }
        epoch_loss += loss;

        for (int c = 0; c < 4; ++c) {
          const auto ci = static_cast<std::size_t>(c);
          const double d_score =
              (sv.probs[ci] - (c == gold ? 1.0 : 0.0)) * inv_batch;
          if (d_score == 0.0) continue;
          grads.head_w += d_score * hiddens[ci].row(0).transpose();
          grads.head_b += d_score;
          Eigen::MatrixXd d_hidden =
              Eigen::MatrixXd::Zero(hiddens[ci].rows(), hiddens[ci].cols());
          d_hidden.row(0) = d_score * result.params.head_w.transpose();
          const Eigen::MatrixXd d_input = encoder_backward_accumulate(
              result.params.layers, tapes[ci], d_hidden, grads.layers);
          embed_backward(prep.sequences[ci], vocab, result.params.tables,
                         model_config, d_input, grads.tables);
        }
      }

      // SGD with momentum: v <- m v + (g + wd p); p <- p - lr v.
      for (std::size_t t = 0; t < param_views.size(); ++t) {
        double* p = param_views[t].data;
        double* g = grad_views[t].data;
        double* v = velocity_views[t].data;
        const Eigen::Index size = param_views[t].size();
        for (Eigen::Index i = 0; i < size; ++i) {
          v[i] = config.momentum * v[i] + g[i] + config.weight_decay * p[i];
          p[i] -= config.learning_rate * v[i];
        }
      }
    }

    EpochRecord record;
    record.epoch = epoch;
    record.loss = epoch_loss / static_cast<double>(prepared_train.size());
    record.metrics =
        evaluate_prepared(metric_pool, result.params, vocab,
                          config.score.mask_off, config.eval_threads);
    if (log_stream) {
      (*log_stream) << epoch_record_to_json_line(record) << '\n';
      log_stream->flush();
    }
    result.log.push_back(record);
  }
  return result;
}

double mean_loss(const std::vector<Instance>& instances,
                 const ModelParams& params, const Vocab& vocab,
                 const KnowledgeBase& kb, const ScoreOptions& options,
                 const Stoplist& stoplist) {
  if (instances.empty()) throw DataError("loss over an empty dataset");
  double total = 0.0;
  for (const Instance& inst : instances) {
    const ScoreVector sv = predict(inst, params, vocab, kb, options, stoplist);
    total += -std::log(sv.probs[static_cast<std::size_t>(inst.gold)]);
  }
  return total / static_cast<double>(instances.size());
}

}  // namespace kvl
