// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>
#include <utility>
#include <vector>

#include "kvl/config.hpp"
#include "kvl/rng.hpp"
#include "kvl/sequence.hpp"

namespace kvl {

/// Additive stand-in for the infinite mask penalty. A finite constant keeps
/// softmax free of NaN; the always-true diagonal guarantees no row is fully
/// masked, and exp(-1e9/sqrt(d_k)) underflows to exactly 0.
inline constexpr double kMaskInf = 1e9;

/// One encoder block: per-head attention projections (head h owns the column
/// block [h*d_h, (h+1)*d_h)), output projection, feed-forward weights and
/// biases, and two layer-norm gain/bias pairs.
struct LayerParams {
  Eigen::MatrixXd wq, wk, wv;  // d x d
  Eigen::MatrixXd wo;          // d x d
  Eigen::MatrixXd w1;          // d x d_ff
  Eigen::VectorXd b1;          // d_ff
  Eigen::MatrixXd w2;          // d_ff x d
  Eigen::VectorXd b2;          // d
  Eigen::VectorXd ln1_gain, ln1_bias;  // d
  Eigen::VectorXd ln2_gain, ln2_bias;  // d
};

LayerParams init_layer(const ModelConfig& config, Rng& rng);
LayerParams zeros_like(const LayerParams& layer);

/// Post-softmax attention scores, one n x n matrix per head per layer.
using AttentionTrace = std::vector<std::vector<Eigen::MatrixXd>>;

/// Every intermediate needed to run the block backwards.
struct LayerTape {
  Eigen::MatrixXd x;                // block input
  Eigen::MatrixXd q, k, v;          // n x d, head-blocked
  std::vector<Eigen::MatrixXd> scores;  // per head, n x n, post-softmax
  Eigen::MatrixXd concat;           // per-head attention outputs, n x d
  Eigen::MatrixXd res1;             // x + concat * wo
  Eigen::MatrixXd xhat1;            // normalized res1 (pre gain/bias)
  Eigen::VectorXd inv_std1;         // per-row 1/sqrt(var + eps)
  Eigen::MatrixXd ln1;
  Eigen::MatrixXd ffn_pre;          // ln1 * w1 + b1
  Eigen::MatrixXd ffn_act;          // gelu(ffn_pre)
  Eigen::MatrixXd res2;             // ln1 + ffn_act * w2 + b2
  Eigen::MatrixXd xhat2;
  Eigen::VectorXd inv_std2;
  Eigen::MatrixXd out;              // block output
};

struct ForwardTape {
  int heads = 0;
  std::vector<LayerTape> layers;

  bool empty() const { return layers.empty(); }
};

/// One mask-self-attention block: per-head scores are
/// softmax((Q K^T + (W - 1) * INF) / sqrt(d_k)), the weighted values are
/// concatenated, projected, and followed by residual + layer norm and a
/// feed-forward sublayer with its own residual + layer norm.
Eigen::MatrixXd mask_attention(const Eigen::MatrixXd& hidden,
                               const LayerParams& layer,
                               const VisibleMatrix& visible, int heads,
                               LayerTape* tape);

/// Sequential block application. `scores` (optional) receives the per-layer
/// post-softmax attention; `tape` (optional) retains what backward() needs.
Eigen::MatrixXd encoder_forward(const Eigen::MatrixXd& input,
                                const std::vector<LayerParams>& layers,
                                const VisibleMatrix& visible, int heads,
                                AttentionTrace* scores = nullptr,
                                ForwardTape* tape = nullptr);

struct EncoderGradients {
  std::vector<LayerParams> layers;  // same shapes as the parameters
  Eigen::MatrixXd input;            // d(loss)/d(input matrix)
};

/// Exact reverse-mode gradients of encoder_forward for the retained tape.
/// Throws ConfigError when the tape is empty (no prior forward).
EncoderGradients encoder_backward(const std::vector<LayerParams>& layers,
                                  const ForwardTape& tape,
                                  const Eigen::MatrixXd& d_out);

/// Accumulating variant used by the training loop; `grads` must already have
/// parameter-shaped zero (or partial-sum) entries.
Eigen::MatrixXd encoder_backward_accumulate(const std::vector<LayerParams>& layers,
                                            const ForwardTape& tape,
                                            const Eigen::MatrixXd& d_out,
                                            std::vector<LayerParams>& grads);

}  // namespace kvl
