// SPDX-License-Identifier: Apache-2.0
// Plain (unmasked) transformer encoder written with explicit scalar loops.
// Serves as the independent oracle for the all-visible equivalence checks,
// so it must not share code with kvl::encoder_forward.
#pragma once

#include <Eigen/Core>
#include <cmath>
#include <vector>

#include "kvl/encoder.hpp"

namespace kvl::test {

inline Eigen::MatrixXd reference_layer_norm(const Eigen::MatrixXd& x,
                                            const Eigen::VectorXd& gain,
                                            const Eigen::VectorXd& bias) {
  const Eigen::Index n = x.rows(), d = x.cols();
  Eigen::MatrixXd out(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    double mean = 0.0;
    for (Eigen::Index c = 0; c < d; ++c) mean += x(i, c);
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (Eigen::Index c = 0; c < d; ++c) {
      var += (x(i, c) - mean) * (x(i, c) - mean);
    }
    var /= static_cast<double>(d);
    const double inv = 1.0 / std::sqrt(var + 1e-12);
    for (Eigen::Index c = 0; c < d; ++c) {
      out(i, c) = gain(c) * ((x(i, c) - mean) * inv) + bias(c);
    }
  }
  return out;
}

/// One block of plain softmax attention plus the feed-forward sublayer,
/// computed head by head with straight loops.
inline Eigen::MatrixXd reference_block(const Eigen::MatrixXd& x,
                                       const LayerParams& p, int heads) {
  const Eigen::Index n = x.rows(), d = x.cols();
  const Eigen::Index dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  Eigen::MatrixXd q = x * p.wq, k = x * p.wk, v = x * p.wv;
  Eigen::MatrixXd concat(n, d);
  for (int h = 0; h < heads; ++h) {
    for (Eigen::Index i = 0; i < n; ++i) {
      std::vector<double> logits(static_cast<std::size_t>(n));
      double max_logit = -1e300;
      for (Eigen::Index j = 0; j < n; ++j) {
        double dot = 0.0;
        for (Eigen::Index c = 0; c < dh; ++c) {
          dot += q(i, h * dh + c) * k(j, h * dh + c);
        }
        logits[static_cast<std::size_t>(j)] = dot * scale;
        max_logit = std::max(max_logit, dot * scale);
      }
      double denom = 0.0;
      for (Eigen::Index j = 0; j < n; ++j) {
        logits[static_cast<std::size_t>(j)] =
            std::exp(logits[static_cast<std::size_t>(j)] - max_logit);
        denom += logits[static_cast<std::size_t>(j)];
      }
      for (Eigen::Index c = 0; c < dh; ++c) {
        double acc = 0.0;
        for (Eigen::Index j = 0; j < n; ++j) {
          acc += logits[static_cast<std::size_t>(j)] / denom * v(j, h * dh + c);
        }
        concat(i, h * dh + c) = acc;
      }
    }
  }

  Eigen::MatrixXd res1 = x + concat * p.wo;
  Eigen::MatrixXd ln1 = reference_layer_norm(res1, p.ln1_gain, p.ln1_bias);

  Eigen::MatrixXd pre = ln1 * p.w1;
  for (Eigen::Index i = 0; i < pre.rows(); ++i) {
    for (Eigen::Index c = 0; c < pre.cols(); ++c) {
      const double z = pre(i, c) + p.b1(c);
      pre(i, c) = 0.5 * z * (1.0 + std::erf(z * M_SQRT1_2));
    }
  }
  Eigen::MatrixXd res2 = ln1 + (pre * p.w2).rowwise() + p.b2.transpose();
  return reference_layer_norm(res2, p.ln2_gain, p.ln2_bias);
}

inline Eigen::MatrixXd reference_encoder(const Eigen::MatrixXd& input,
                                         const std::vector<LayerParams>& layers,
                                         int heads) {
  Eigen::MatrixXd hidden = input;
  for (const LayerParams& layer : layers) {
    hidden = reference_block(hidden, layer, heads);
  }
  return hidden;
}

}  // namespace kvl::test
