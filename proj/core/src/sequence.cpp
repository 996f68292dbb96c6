// SPDX-License-Identifier: Apache-2.0
#include "kvl/sequence.hpp"

#include <string>

#include "kvl/error.hpp"
#include "kvl/tokenize.hpp"

namespace kvl {

namespace {

constexpr const char* kClsSurface = "[CLS]";
constexpr const char* kSepSurface = "[SEP]";
constexpr const char* kImgSurface = "[IMG]";

void validate_regions(const std::vector<Region>& regions,
                      const AssembleOptions& options) {
  for (std::size_t i = 0; i < regions.size(); ++i) {
    const Region& region = regions[i];
    if (region.appearance.size() != options.d_app) {
      throw DataError("region " + std::to_string(i) +
                      ": appearance vector has " +
                      std::to_string(region.appearance.size()) +
                      " entries, expected " + std::to_string(options.d_app));
    }
    const auto& b = region.bbox;
    if (!(b[0] < b[2]) || !(b[1] < b[3])) {
      throw DataError("region " + std::to_string(i) +
                      ": degenerate bounding box");
    }
    if (options.image_width > 0.0 && options.image_height > 0.0) {
      if (b[0] < 0.0 || b[1] < 0.0 || b[2] > options.image_width ||
          b[3] > options.image_height) {
        throw DataError("region " + std::to_string(i) +
                        ": bounding box outside the image");
      }
    }
  }
}

/// Positions per PositionMode. During assembly injected tokens carry their
/// 1-based offset within their entity in rel_pos; this pass turns offsets
/// into final positions.
void assign_positions(std::vector<SeqToken>& tokens, PositionMode mode,
                      int* reserved_img_pos) {
  int next = 0;
  if (mode == PositionMode::Absolute) {
    for (SeqToken& tok : tokens) {
      if (tok.kind == TokenKind::Img) continue;
      tok.rel_pos = next++;
    }
  } else {
    for (SeqToken& tok : tokens) {
      if (tok.kind == TokenKind::Img || tok.injected()) continue;
      tok.rel_pos = next++;
    }
    for (SeqToken& tok : tokens) {
      if (!tok.injected()) continue;
      const int anchor_pos = tokens[tok.anchor].rel_pos;
      tok.rel_pos = mode == PositionMode::Anchor ? anchor_pos
                                                 : anchor_pos + tok.rel_pos;
    }
  }
  *reserved_img_pos = next;
  for (SeqToken& tok : tokens) {
    if (tok.kind == TokenKind::Img) tok.rel_pos = next;
  }
}

}  // namespace

std::string VisibleMatrix::row_string(std::size_t i) const {
  std::string row(n_, '0');
  for (std::size_t j = 0; j < n_; ++j) {
    if (bits_[i * n_ + j]) row[j] = '1';
  }
  return row;
}

bool visible_by_policy(const std::vector<SeqToken>& tokens, std::size_t i,
                       std::size_t j) {
  if (i == j) return true;
  const SeqToken& a = tokens[i];
  const SeqToken& b = tokens[j];
  if (!a.injected() && !b.injected()) return true;
  if (a.injected() && b.injected()) return a.anchor == b.anchor;
  const SeqToken& injected = a.injected() ? a : b;
  const std::size_t other = a.injected() ? j : i;
  return static_cast<std::size_t>(injected.anchor) == other;
}

VisibleMatrix build_visible_matrix(const std::vector<SeqToken>& tokens) {
  const std::size_t n = tokens.size();
  VisibleMatrix visible(n, true);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (!visible_by_policy(tokens, i, j)) visible.set(i, j, false);
    }
  }
  return visible;
}

EnrichedSequence assemble(const std::vector<std::string>& query_tokens,
                          const std::vector<std::string>& response_tokens,
                          const std::vector<Region>& regions,
                          const KnowledgeBase& kb, const AssembleOptions& options,
                          const Stoplist& stoplist) {
  validate_regions(regions, options);

  EnrichedSequence seq;
  seq.regions = regions;
  seq.image_width = options.image_width;
  seq.image_height = options.image_height;
  auto& tokens = seq.tokens;

  auto push_special = [&](const char* surface, TokenKind kind, Segment segment) {
    tokens.push_back(SeqToken{surface, kind, segment, 0, kNoAnchor});
  };

  // Text tokens are followed by their injected entities; injected rel_pos
  // temporarily holds the offset within the entity (see assign_positions).
  auto push_text = [&](const std::vector<std::string>& words, Segment segment) {
    for (const std::string& word : words) {
      const int anchor = static_cast<int>(tokens.size());
      tokens.push_back(SeqToken{word, TokenKind::Text, segment, 0, kNoAnchor});
      if (options.k == 0) continue;
      for (const ScoredEntity& entity : kb.query(word, options.k, stoplist)) {
        int offset = 1;
        for (const std::string& piece : tokenize(entity.entity)) {
          tokens.push_back(
              SeqToken{piece, TokenKind::Text, segment, offset++, anchor});
        }
      }
    }
  };

  push_special(kClsSurface, TokenKind::Cls, Segment::Query);
  push_text(query_tokens, Segment::Query);
  push_special(kSepSurface, TokenKind::Sep, Segment::Query);
  push_text(response_tokens, Segment::Response);
  push_special(kSepSurface, TokenKind::Sep, Segment::Response);
  for (std::size_t r = 0; r < regions.size(); ++r) {
    push_special(kImgSurface, TokenKind::Img, Segment::Rois);
  }
  push_special(kSepSurface, TokenKind::Sep, Segment::Rois);

  assign_positions(tokens, options.position_mode, &seq.reserved_img_pos);
  seq.visible = build_visible_matrix(tokens);
  return seq;
}

EnrichedSequence strip_injected(const EnrichedSequence& seq) {
  EnrichedSequence out;
  out.regions = seq.regions;
  out.image_width = seq.image_width;
  out.image_height = seq.image_height;
  out.reserved_img_pos = seq.reserved_img_pos;
  for (const SeqToken& tok : seq.tokens) {
    if (!tok.injected()) out.tokens.push_back(tok);
  }
  out.visible = VisibleMatrix::all_true(out.tokens.size());
  return out;
}

}  // namespace kvl
