// SPDX-License-Identifier: Apache-2.0
#include "kvl/model.hpp"

#include <algorithm>
#include <cmath>

#include "kvl/error.hpp"
#include "kvl/tokenize.hpp"

namespace kvl {

ModelParams init_params(const ModelConfig& config, int vocab_rows,
                        std::uint64_t seed) {
  config.validate();
  if (vocab_rows < 1) throw ConfigError("vocabulary needs at least the OOV row");
  Rng rng(seed);
  ModelParams params;
  params.config = config;
  params.tables = init_tables(config, vocab_rows, rng);
  params.layers.reserve(static_cast<std::size_t>(config.layers));
  for (int l = 0; l < config.layers; ++l) {
    params.layers.push_back(init_layer(config, rng));
  }
  params.head_w = Eigen::VectorXd::Zero(config.d);
  params.head_b = 0.0;
  return params;
}

ModelParams zeros_like(const ModelParams& params) {
  ModelParams out;
  out.config = params.config;
  out.tables = zeros_like(params.tables);
  out.layers.reserve(params.layers.size());
  for (const LayerParams& layer : params.layers) {
    out.layers.push_back(zeros_like(layer));
  }
  out.head_w = Eigen::VectorXd::Zero(params.head_w.size());
  out.head_b = 0.0;
  return out;
}

std::vector<TensorView> tensor_views(ModelParams& params) {
  std::vector<TensorView> views;
  auto add = [&views](const std::string& name, Eigen::MatrixXd& m) {
    views.push_back(TensorView{name, m.data(), m.rows(), m.cols()});
  };
  auto add_vec = [&views](const std::string& name, Eigen::VectorXd& v) {
    views.push_back(TensorView{name, v.data(), v.size(), 1});
  };
  add("embed.token", params.tables.token);
  add("embed.segment", params.tables.segment);
  add("embed.position", params.tables.position);
  views.push_back(TensorView{"embed.img_token", params.tables.img_token.data(),
                             1, params.tables.img_token.cols()});
  add("embed.appearance_proj", params.tables.appearance_proj);
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const std::string prefix = "layers." + std::to_string(l) + ".";
    LayerParams& layer = params.layers[l];
    add(prefix + "wq", layer.wq);
    add(prefix + "wk", layer.wk);
    add(prefix + "wv", layer.wv);
    add(prefix + "wo", layer.wo);
    add(prefix + "w1", layer.w1);
    add_vec(prefix + "b1", layer.b1);
    add(prefix + "w2", layer.w2);
    add_vec(prefix + "b2", layer.b2);
    add_vec(prefix + "ln1_gain", layer.ln1_gain);
    add_vec(prefix + "ln1_bias", layer.ln1_bias);
    add_vec(prefix + "ln2_gain", layer.ln2_gain);
    add_vec(prefix + "ln2_bias", layer.ln2_bias);
  }
  add_vec("head.w", params.head_w);
  views.push_back(TensorView{"head.b", &params.head_b, 1, 1});
  return views;
}

std::int64_t parameter_count(ModelParams& params) {
  std::int64_t total = 0;
  for (const TensorView& view : tensor_views(params)) total += view.size();
  return total;
}

ScoreVector score_vector_from(const std::array<double, 4>& scores) {
  ScoreVector out;
  out.scores = scores;
  const double max_score = *std::max_element(scores.begin(), scores.end());
  double sum = 0.0;
  for (int c = 0; c < 4; ++c) {
    out.probs[c] = std::exp(scores[c] - max_score);
    sum += out.probs[c];
  }
  for (int c = 0; c < 4; ++c) out.probs[c] /= sum;
  out.argmax = static_cast<int>(
      std::max_element(scores.begin(), scores.end()) - scores.begin());
  return out;
}

EnrichedSequence assemble_instance(const Instance& instance, int candidate,
                                   const KnowledgeBase& kb,
                                   const ScoreOptions& options,
                                   const ModelConfig& config,
                                   const Stoplist& stoplist) {
  if (candidate < 0 || candidate > 3) {
    throw ConfigError("candidate index out of range 0..3");
  }
  AssembleOptions assemble_options;
  assemble_options.k = options.k;
  assemble_options.position_mode = options.position_mode;
  assemble_options.d_app = static_cast<std::size_t>(config.d_app);
  assemble_options.image_width = instance.image.width;
  assemble_options.image_height = instance.image.height;
  return assemble(tokenize(instance.query),
                  tokenize(instance.responses[static_cast<std::size_t>(candidate)]),
                  instance.regions, kb, assemble_options, stoplist);
}

double score_sequence(const EnrichedSequence& seq, const ModelParams& params,
                      const Vocab& vocab, bool mask_off, ForwardTape* tape,
                      Eigen::MatrixXd* cls_hidden) {
  const Eigen::MatrixXd input = embed(seq, vocab, params.tables, params.config);
  const VisibleMatrix visible =
      mask_off ? VisibleMatrix::all_true(seq.tokens.size()) : seq.visible;
  const Eigen::MatrixXd hidden = encoder_forward(
      input, params.layers, visible, params.config.heads, nullptr, tape);
  if (cls_hidden) *cls_hidden = hidden;
  return params.head_w.dot(hidden.row(0)) + params.head_b;
}

double score_pair(const Instance& instance, int candidate,
                  const ModelParams& params, const Vocab& vocab,
                  const KnowledgeBase& kb, const ScoreOptions& options,
                  const Stoplist& stoplist) {
  try {
    const EnrichedSequence seq =
        assemble_instance(instance, candidate, kb, options, params.config, stoplist);
    return score_sequence(seq, params, vocab, options.mask_off);
  } catch (const DataError& e) {
    throw DataError("instance " + std::to_string(instance.id) + ": " + e.what());
  }
}

ScoreVector predict(const Instance& instance, const ModelParams& params,
                    const Vocab& vocab, const KnowledgeBase& kb,
                    const ScoreOptions& options, const Stoplist& stoplist) {
  std::array<double, 4> scores{};
  for (int c = 0; c < 4; ++c) {
    scores[static_cast<std::size_t>(c)] =
        score_pair(instance, c, params, vocab, kb, options, stoplist);
  }
  return score_vector_from(scores);
}

}  // namespace kvl
