// SPDX-License-Identifier: Apache-2.0
#include "kvl/encoder.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "kvl/error.hpp"

namespace kvl {

namespace {

constexpr double kLayerNormEps = 1e-12;
constexpr double kInvSqrt2Pi = 0.3989422804014327;

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * M_SQRT1_2)); }

double gelu_grad(double x) {
  return 0.5 * (1.0 + std::erf(x * M_SQRT1_2)) +
         x * kInvSqrt2Pi * std::exp(-0.5 * x * x);
}

/// Row-wise layer norm; writes the pre-gain normalized rows and the per-row
/// inverse standard deviation for the backward pass.
Eigen::MatrixXd layer_norm(const Eigen::MatrixXd& x, const Eigen::VectorXd& gain,
                           const Eigen::VectorXd& bias, Eigen::MatrixXd* xhat,
                           Eigen::VectorXd* inv_std) {
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  xhat->resize(n, d);
  inv_std->resize(n);
  Eigen::MatrixXd out(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double mean = x.row(i).mean();
    const double var = (x.row(i).array() - mean).square().sum() / d;
    const double inv = 1.0 / std::sqrt(var + kLayerNormEps);
    (*inv_std)(i) = inv;
    xhat->row(i) = (x.row(i).array() - mean) * inv;
    out.row(i) =
        (xhat->row(i).array() * gain.transpose().array()) + bias.transpose().array();
  }
  return out;
}

/// d(loss)/d(x) for y = gain .* xhat + bias, given d(loss)/d(y).
Eigen::MatrixXd layer_norm_backward(const Eigen::MatrixXd& d_out,
                                    const Eigen::MatrixXd& xhat,
                                    const Eigen::VectorXd& inv_std,
                                    const Eigen::VectorXd& gain,
                                    Eigen::VectorXd& d_gain,
                                    Eigen::VectorXd& d_bias) {
  const Eigen::Index n = d_out.rows();
  const Eigen::Index d = d_out.cols();
  Eigen::MatrixXd dx(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    d_gain.array() += d_out.row(i).transpose().array() * xhat.row(i).transpose().array();
    d_bias += d_out.row(i).transpose();
    const Eigen::ArrayXd dxhat =
        d_out.row(i).transpose().array() * gain.array();
    const double mean_dxhat = dxhat.mean();
    const double mean_dxhat_xhat =
        (dxhat * xhat.row(i).transpose().array()).mean();
    dx.row(i) = (inv_std(i) *
                 (dxhat - mean_dxhat - xhat.row(i).transpose().array() * mean_dxhat_xhat))
                    .transpose();
  }
  return dx;
}

void check_layer_dims(const Eigen::MatrixXd& hidden, const LayerParams& layer,
                      const VisibleMatrix& visible, int heads) {
  const Eigen::Index d = hidden.cols();
  if (heads <= 0 || d % heads != 0) {
    throw ConfigError("hidden width " + std::to_string(d) +
                      " is not divisible by heads " + std::to_string(heads));
  }
  if (layer.wq.rows() != d || layer.wq.cols() != d || layer.wk.rows() != d ||
      layer.wv.rows() != d || layer.wo.rows() != d || layer.w1.rows() != d ||
      layer.w2.cols() != d) {
    throw std::invalid_argument("layer parameter shapes do not match the input");
  }
  if (visible.size() != static_cast<std::size_t>(hidden.rows())) {
    throw std::invalid_argument("visible matrix size does not match the sequence");
  }
  for (std::size_t i = 0; i < visible.size(); ++i) {
    if (!visible.at(i, i)) {
      throw std::invalid_argument("visible matrix diagonal must be true");
    }
  }
}

}  // namespace

LayerParams init_layer(const ModelConfig& config, Rng& rng) {
  const int d = config.d;
  const int d_ff = config.d_ff;
  auto xavier = [&rng](Eigen::MatrixXd& m, int fan_in, int fan_out) {
    const double r = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) {
        m(i, j) = rng.uniform(-r, r);
      }
    }
  };
  LayerParams layer;
  layer.wq.resize(d, d);
  layer.wk.resize(d, d);
  layer.wv.resize(d, d);
  layer.wo.resize(d, d);
  layer.w1.resize(d, d_ff);
  layer.w2.resize(d_ff, d);
  xavier(layer.wq, d, d);
  xavier(layer.wk, d, d);
  xavier(layer.wv, d, d);
  xavier(layer.wo, d, d);
  xavier(layer.w1, d, d_ff);
  xavier(layer.w2, d_ff, d);
  layer.b1 = Eigen::VectorXd::Zero(d_ff);
  layer.b2 = Eigen::VectorXd::Zero(d);
  layer.ln1_gain = Eigen::VectorXd::Ones(d);
  layer.ln1_bias = Eigen::VectorXd::Zero(d);
  layer.ln2_gain = Eigen::VectorXd::Ones(d);
  layer.ln2_bias = Eigen::VectorXd::Zero(d);
  return layer;
}

LayerParams zeros_like(const LayerParams& layer) {
  LayerParams out;
  out.wq = Eigen::MatrixXd::Zero(layer.wq.rows(), layer.wq.cols());
  out.wk = Eigen::MatrixXd::Zero(layer.wk.rows(), layer.wk.cols());
  out.wv = Eigen::MatrixXd::Zero(layer.wv.rows(), layer.wv.cols());
  out.wo = Eigen::MatrixXd::Zero(layer.wo.rows(), layer.wo.cols());
  out.w1 = Eigen::MatrixXd::Zero(layer.w1.rows(), layer.w1.cols());
  out.b1 = Eigen::VectorXd::Zero(layer.b1.size());
  out.w2 = Eigen::MatrixXd::Zero(layer.w2.rows(), layer.w2.cols());
  out.b2 = Eigen::VectorXd::Zero(layer.b2.size());
  out.ln1_gain = Eigen::VectorXd::Zero(layer.ln1_gain.size());
  out.ln1_bias = Eigen::VectorXd::Zero(layer.ln1_bias.size());
  out.ln2_gain = Eigen::VectorXd::Zero(layer.ln2_gain.size());
  out.ln2_bias = Eigen::VectorXd::Zero(layer.ln2_bias.size());
  return out;
}

Eigen::MatrixXd mask_attention(const Eigen::MatrixXd& hidden,
                               const LayerParams& layer,
                               const VisibleMatrix& visible, int heads,
                               LayerTape* tape) {
  check_layer_dims(hidden, layer, visible, heads);
  const Eigen::Index n = hidden.rows();
  const Eigen::Index d = hidden.cols();
  const Eigen::Index dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  LayerTape local;
  LayerTape& t = tape ? *tape : local;
  t.x = hidden;
  t.q.noalias() = hidden * layer.wq;
  t.k.noalias() = hidden * layer.wk;
  t.v.noalias() = hidden * layer.wv;
  t.scores.assign(static_cast<std::size_t>(heads), Eigen::MatrixXd());
  t.concat.resize(n, d);

  for (int h = 0; h < heads; ++h) {
    const auto qh = t.q.middleCols(h * dh, dh);
    const auto kh = t.k.middleCols(h * dh, dh);
    const auto vh = t.v.middleCols(h * dh, dh);
    Eigen::MatrixXd logits = qh * kh.transpose();
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) {
        if (!visible.at(static_cast<std::size_t>(i), static_cast<std::size_t>(j))) {
          logits(i, j) -= kMaskInf;
        }
      }
    }
    logits *= scale;
    // Row-wise softmax; the diagonal is always unmasked, so the row maximum
    // is a real logit and masked entries underflow to exactly zero.
    Eigen::MatrixXd& s = t.scores[static_cast<std::size_t>(h)];
    s.resize(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double row_max = logits.row(i).maxCoeff();
      const Eigen::ArrayXd e = (logits.row(i).transpose().array() - row_max).exp();
      s.row(i) = (e / e.sum()).transpose();
    }
    t.concat.middleCols(h * dh, dh).noalias() = s * vh;
  }

  t.res1.noalias() = t.concat * layer.wo;
  t.res1 += t.x;
  t.ln1 = layer_norm(t.res1, layer.ln1_gain, layer.ln1_bias, &t.xhat1, &t.inv_std1);
  t.ffn_pre.noalias() = t.ln1 * layer.w1;
  t.ffn_pre.rowwise() += layer.b1.transpose();
  t.ffn_act = t.ffn_pre.unaryExpr([](double x) { return gelu(x); });
  t.res2.noalias() = t.ffn_act * layer.w2;
  t.res2.rowwise() += layer.b2.transpose();
  t.res2 += t.ln1;
  t.out = layer_norm(t.res2, layer.ln2_gain, layer.ln2_bias, &t.xhat2, &t.inv_std2);
  return t.out;
}

Eigen::MatrixXd encoder_forward(const Eigen::MatrixXd& input,
                                const std::vector<LayerParams>& layers,
                                const VisibleMatrix& visible, int heads,
                                AttentionTrace* scores, ForwardTape* tape) {
  if (layers.empty()) {
    throw ConfigError("encoder needs at least one layer");
  }
  if (scores) scores->clear();
  if (tape) {
    tape->heads = heads;
    tape->layers.assign(layers.size(), LayerTape());
  }
  Eigen::MatrixXd hidden = input;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    LayerTape local;
    LayerTape* t = tape ? &tape->layers[l] : &local;
    hidden = mask_attention(hidden, layers[l], visible, heads, t);
    if (scores) scores->push_back(t->scores);
  }
  return hidden;
}

Eigen::MatrixXd encoder_backward_accumulate(const std::vector<LayerParams>& layers,
                                            const ForwardTape& tape,
                                            const Eigen::MatrixXd& d_out,
                                            std::vector<LayerParams>& grads) {
  if (tape.empty() || tape.layers.size() != layers.size()) {
    throw ConfigError("backward needs the tape of a prior forward pass");
  }
  const int heads = tape.heads;
  Eigen::MatrixXd g = d_out;

  for (std::size_t l = layers.size(); l-- > 0;) {
    const LayerParams& layer = layers[l];
    LayerParams& grad = grads[l];
    const LayerTape& t = tape.layers[l];
    const Eigen::Index n = t.x.rows();
    const Eigen::Index d = t.x.cols();
    const Eigen::Index dh = d / heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

    // Second layer norm.
    Eigen::MatrixXd d_res2 = layer_norm_backward(g, t.xhat2, t.inv_std2,
                                                 layer.ln2_gain, grad.ln2_gain,
                                                 grad.ln2_bias);

    // res2 = ln1 + ffn_act * w2 + b2.
    Eigen::MatrixXd d_ln1 = d_res2;
    grad.w2.noalias() += t.ffn_act.transpose() * d_res2;
    grad.b2 += d_res2.colwise().sum().transpose();
    Eigen::MatrixXd d_act = d_res2 * layer.w2.transpose();
    Eigen::MatrixXd d_pre =
        d_act.array() * t.ffn_pre.unaryExpr([](double x) { return gelu_grad(x); }).array();
    grad.w1.noalias() += t.ln1.transpose() * d_pre;
    grad.b1 += d_pre.colwise().sum().transpose();
    d_ln1.noalias() += d_pre * layer.w1.transpose();

    // First layer norm.
    Eigen::MatrixXd d_res1 = layer_norm_backward(d_ln1, t.xhat1, t.inv_std1,
                                                 layer.ln1_gain, grad.ln1_gain,
                                                 grad.ln1_bias);

    // res1 = x + concat * wo.
    Eigen::MatrixXd d_x = d_res1;
    grad.wo.noalias() += t.concat.transpose() * d_res1;
    Eigen::MatrixXd d_concat = d_res1 * layer.wo.transpose();

    Eigen::MatrixXd d_q(n, d), d_k(n, d), d_v(n, d);
    for (int h = 0; h < heads; ++h) {
      const auto qh = t.q.middleCols(h * dh, dh);
      const auto kh = t.k.middleCols(h * dh, dh);
      const auto vh = t.v.middleCols(h * dh, dh);
      const Eigen::MatrixXd& s = t.scores[static_cast<std::size_t>(h)];
      const auto d_head = d_concat.middleCols(h * dh, dh);

      // head = S * V.
      Eigen::MatrixXd d_s = d_head * vh.transpose();
      d_v.middleCols(h * dh, dh).noalias() = s.transpose() * d_head;

      // Softmax rows: dlogits = S .* (dS - rowsum(dS .* S)); the additive
      // mask is constant, so only the 1/sqrt(d_k) factor carries through.
      Eigen::MatrixXd d_logits(n, n);
      for (Eigen::Index i = 0; i < n; ++i) {
        const double dot = d_s.row(i).dot(s.row(i));
        d_logits.row(i) = (s.row(i).array() * (d_s.row(i).array() - dot)) * scale;
      }
      d_q.middleCols(h * dh, dh).noalias() = d_logits * kh;
      d_k.middleCols(h * dh, dh).noalias() = d_logits.transpose() * qh;
    }

    grad.wq.noalias() += t.x.transpose() * d_q;
    grad.wk.noalias() += t.x.transpose() * d_k;
    grad.wv.noalias() += t.x.transpose() * d_v;
    d_x.noalias() += d_q * layer.wq.transpose();
    d_x.noalias() += d_k * layer.wk.transpose();
    d_x.noalias() += d_v * layer.wv.transpose();

    g = std::move(d_x);
  }
  return g;
}

EncoderGradients encoder_backward(const std::vector<LayerParams>& layers,
                                  const ForwardTape& tape,
                                  const Eigen::MatrixXd& d_out) {
  EncoderGradients out;
  out.layers.reserve(layers.size());
  for (const LayerParams& layer : layers) out.layers.push_back(zeros_like(layer));
  out.input = encoder_backward_accumulate(layers, tape, d_out, out.layers);
  return out;
}

}  // namespace kvl
