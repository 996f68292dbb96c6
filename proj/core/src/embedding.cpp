// SPDX-License-Identifier: Apache-2.0
#include "kvl/embedding.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>

#include "kvl/error.hpp"

namespace kvl {

namespace {

bool near(double a, double b) {
  return std::abs(a - b) <= 1e-9 * std::max({1.0, std::abs(a), std::abs(b)});
}

/// The region whose box spans the whole image supplies the appearance of all
/// non-visual elements.
const Region& whole_image_region(const EnrichedSequence& seq) {
  for (const Region& region : seq.regions) {
    if (near(region.bbox[0], 0.0) && near(region.bbox[1], 0.0) &&
        near(region.bbox[2], seq.image_width) &&
        near(region.bbox[3], seq.image_height)) {
      return region;
    }
  }
  throw DataError("sequence has no whole-image region");
}

}  // namespace

Vocab::Vocab(std::vector<std::string> surfaces) : surfaces_(std::move(surfaces)) {
  for (std::size_t i = 0; i < surfaces_.size(); ++i) {
    index_.emplace(surfaces_[i], static_cast<int>(i) + 1);
  }
}

Vocab Vocab::load(std::istream& in) {
  std::vector<std::string> surfaces;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    surfaces.push_back(line);
  }
  return Vocab(std::move(surfaces));
}

Vocab Vocab::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open vocabulary file: " + path);
  return load(in);
}

int Vocab::row(const std::string& surface) const {
  auto it = index_.find(surface);
  return it == index_.end() ? 0 : it->second;
}

void Vocab::save(std::ostream& out) const {
  for (const std::string& surface : surfaces_) out << surface << '\n';
}

void Vocab::save_file(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write vocabulary file: " + path);
  save(out);
}

namespace {

/// Row-major fill so the draw order is independent of Eigen's storage order.
void fill_table(Eigen::MatrixXd& m, Rng& rng) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      m(r, c) = rng.uniform(-0.02, 0.02);
    }
  }
}

}  // namespace

EmbedTables init_tables(const ModelConfig& config, int vocab_rows, Rng& rng) {
  config.validate();
  EmbedTables tables;
  tables.token.resize(vocab_rows, config.d);
  tables.segment.resize(3, config.d);
  tables.position.resize(config.max_seq, config.d);
  tables.img_token.resize(config.d);
  tables.appearance_proj.resize(config.d_app, config.d);
  fill_table(tables.token, rng);
  fill_table(tables.segment, rng);
  fill_table(tables.position, rng);
  for (Eigen::Index c = 0; c < tables.img_token.cols(); ++c) {
    tables.img_token(c) = rng.uniform(-0.02, 0.02);
  }
  fill_table(tables.appearance_proj, rng);
  return tables;
}

EmbedTables zeros_like(const EmbedTables& tables) {
  EmbedTables out;
  out.token = Eigen::MatrixXd::Zero(tables.token.rows(), tables.token.cols());
  out.segment = Eigen::MatrixXd::Zero(tables.segment.rows(), tables.segment.cols());
  out.position = Eigen::MatrixXd::Zero(tables.position.rows(), tables.position.cols());
  out.img_token = Eigen::RowVectorXd::Zero(tables.img_token.cols());
  out.appearance_proj =
      Eigen::MatrixXd::Zero(tables.appearance_proj.rows(), tables.appearance_proj.cols());
  return out;
}

Eigen::VectorXd geo_embed(const std::array<double, 4>& bbox, double image_width,
                          double image_height, int d) {
  if (d % 8 != 0) {
    throw ConfigError("geometry lift needs d divisible by 8, got " +
                      std::to_string(d));
  }
  if (image_width <= 0.0 || image_height <= 0.0) {
    throw DataError("geometry lift needs a positive image size");
  }
  const std::array<double, 4> v = {bbox[0] / image_width, bbox[1] / image_height,
                                   bbox[2] / image_width, bbox[3] / image_height};
  const int m = d / 8;
  Eigen::VectorXd out(d);
  for (int coord = 0; coord < 4; ++coord) {
    for (int i = 0; i < m; ++i) {
      const double freq =
          std::pow(1000.0, -static_cast<double>(i) / static_cast<double>(m));
      out[coord * 2 * m + i] = std::sin(v[coord] * freq);
      out[coord * 2 * m + m + i] = std::cos(v[coord] * freq);
    }
  }
  return out;
}

Eigen::MatrixXd embed(const EnrichedSequence& seq, const Vocab& vocab,
                      const EmbedTables& tables, const ModelConfig& config) {
  const auto n = static_cast<Eigen::Index>(seq.tokens.size());
  std::size_t img_count = 0;
  for (const SeqToken& tok : seq.tokens) {
    if (tok.kind == TokenKind::Img) ++img_count;
  }
  if (img_count != seq.regions.size()) {
    throw DataError("sequence has " + std::to_string(img_count) +
                    " [IMG] tokens but " + std::to_string(seq.regions.size()) +
                    " regions");
  }

  const Region& whole = whole_image_region(seq);
  const Eigen::Map<const Eigen::VectorXd> whole_app(whole.appearance.data(),
                                                    whole.appearance.size());
  const Eigen::RowVectorXd text_visual =
      whole_app.transpose() * tables.appearance_proj;

  Eigen::MatrixXd input(n, config.d);
  std::size_t img_index = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const SeqToken& tok = seq.tokens[static_cast<std::size_t>(i)];
    if (tok.rel_pos < 0 || tok.rel_pos >= tables.position.rows()) {
      throw DataError("token " + std::to_string(i) + " ('" + tok.surface +
                      "') has position " + std::to_string(tok.rel_pos) +
                      " outside the position table (" +
                      std::to_string(tables.position.rows()) + " rows)");
    }
    Eigen::RowVectorXd row = tables.segment.row(static_cast<int>(tok.segment)) +
                             tables.position.row(tok.rel_pos);
    if (tok.kind == TokenKind::Img) {
      const Region& region = seq.regions[img_index++];
      const Eigen::Map<const Eigen::VectorXd> app(region.appearance.data(),
                                                  region.appearance.size());
      row += tables.img_token;
      row += app.transpose() * tables.appearance_proj;
      row += geo_embed(region.bbox, seq.image_width, seq.image_height, config.d)
                 .transpose();
    } else {
      row += tables.token.row(vocab.row(tok.surface));
      row += text_visual;
    }
    input.row(i) = row;
  }
  return input;
}

void embed_backward(const EnrichedSequence& seq, const Vocab& vocab,
                    const EmbedTables& tables, const ModelConfig& config,
                    const Eigen::MatrixXd& d_input, EmbedTables& grads) {
  (void)config;
  const auto n = static_cast<Eigen::Index>(seq.tokens.size());
  if (d_input.rows() != n) {
    throw DataError("gradient rows do not match the sequence length");
  }
  const Region& whole = whole_image_region(seq);
  const Eigen::Map<const Eigen::VectorXd> whole_app(whole.appearance.data(),
                                                    whole.appearance.size());

  Eigen::RowVectorXd text_grad = Eigen::RowVectorXd::Zero(d_input.cols());
  std::size_t img_index = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const SeqToken& tok = seq.tokens[static_cast<std::size_t>(i)];
    const auto g = d_input.row(i);
    grads.segment.row(static_cast<int>(tok.segment)) += g;
    grads.position.row(tok.rel_pos) += g;
    if (tok.kind == TokenKind::Img) {
      const Region& region = seq.regions[img_index++];
      const Eigen::Map<const Eigen::VectorXd> app(region.appearance.data(),
                                                  region.appearance.size());
      grads.img_token += g;
      grads.appearance_proj.noalias() += app * g;
    } else {
      grads.token.row(vocab.row(tok.surface)) += g;
      text_grad += g;
    }
  }
  // All text rows share the whole-image appearance term.
  grads.appearance_proj.noalias() += whole_app * text_grad;
}

}  // namespace kvl
