// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>
#include <array>
#include <iosfwd>
#include <string>
#include <unordered_map>
#include <vector>

#include "kvl/config.hpp"
#include "kvl/rng.hpp"
#include "kvl/sequence.hpp"

namespace kvl {

/// Surface-to-row mapping. Row 0 is reserved for out-of-vocabulary tokens;
/// line i of a vocabulary file maps to row i + 1.
class Vocab {
 public:
  Vocab() = default;
  explicit Vocab(std::vector<std::string> surfaces);

  static Vocab load(std::istream& in);
  static Vocab load_file(const std::string& path);

  /// Embedding row for a surface; 0 when unknown.
  int row(const std::string& surface) const;

  /// Total embedding rows including the OOV row.
  int rows() const { return static_cast<int>(surfaces_.size()) + 1; }

  const std::vector<std::string>& surfaces() const { return surfaces_; }

  void save(std::ostream& out) const;
  void save_file(const std::string& path) const;

 private:
  std::vector<std::string> surfaces_;
  std::unordered_map<std::string, int> index_;
};

/// All input-side parameter tables. Element (i) of the encoder input is the
/// sum of a token embedding, a segment embedding, a position embedding, and a
/// visual feature term.
struct EmbedTables {
  Eigen::MatrixXd token;            // vocab rows (incl. OOV row 0) x d
  Eigen::MatrixXd segment;          // 3 x d
  Eigen::MatrixXd position;         // max_seq x d
  Eigen::RowVectorXd img_token;     // shared [IMG] token embedding, 1 x d
  Eigen::MatrixXd appearance_proj;  // d_app x d
};

/// Uniform(-0.02, 0.02) initialization of every table, in a fixed draw order.
EmbedTables init_tables(const ModelConfig& config, int vocab_rows, Rng& rng);

EmbedTables zeros_like(const EmbedTables& tables);

/// Sinusoidal lift of the normalized box (x_lt/W, y_lt/H, x_rb/W, y_rb/H):
/// each coordinate contributes d/8 sine and d/8 cosine features at
/// wavelengths spaced geometrically with base 1000.
Eigen::VectorXd geo_embed(const std::array<double, 4>& bbox, double image_width,
                          double image_height, int d);

/// Encoder input matrix, one row per token. Text and special tokens use the
/// whole-image appearance (taken from the first region spanning the image);
/// Img tokens use their own region's appearance plus the geometry lift.
/// Throws DataError for out-of-range positions or missing regions.
Eigen::MatrixXd embed(const EnrichedSequence& seq, const Vocab& vocab,
                      const EmbedTables& tables, const ModelConfig& config);

/// Accumulate d(loss)/d(tables) for the given d(loss)/d(input rows).
void embed_backward(const EnrichedSequence& seq, const Vocab& vocab,
                    const EmbedTables& tables, const ModelConfig& config,
                    const Eigen::MatrixXd& d_input, EmbedTables& grads);

}  // namespace kvl
