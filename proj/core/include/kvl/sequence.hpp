// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "kvl/kb.hpp"

namespace kvl {

enum class TokenKind { Text, Img, Cls, Sep };

/// Input source class of a sequence element: query, response, or image RoIs.
enum class Segment : int { Query = 0, Response = 1, Rois = 2 };

/// How sequence positions are numbered.
///  - Relative: original tokens keep their pre-injection numbering; each
///    injected entity counts up from its anchor's position.
///  - Absolute: every non-image token is numbered consecutively after
///    injection (ablation mode).
///  - Anchor: injected tokens copy their anchor's position (second ablation
///    mode, usually combined with disabling the visible matrix).
enum class PositionMode { Relative, Absolute, Anchor };

/// One detected image region: pixel-space box corners (left-top, right-bottom),
/// an appearance feature vector, and an optional category label.
struct Region {
  std::array<double, 4> bbox{};  // x_lt, y_lt, x_rb, y_rb
  std::vector<double> appearance;
  std::optional<std::string> label;
};

inline constexpr int kNoAnchor = -1;

struct SeqToken {
  std::string surface;
  TokenKind kind = TokenKind::Text;
  Segment segment = Segment::Query;
  int rel_pos = 0;
  int anchor = kNoAnchor;  // index of the original token this was injected after

  bool injected() const { return anchor != kNoAnchor; }
};

/// Dense n x n boolean visibility relation; bit (i, j) says token j is
/// visible to token i.
class VisibleMatrix {
 public:
  VisibleMatrix() = default;
  explicit VisibleMatrix(std::size_t n, bool value)
      : n_(n), bits_(n * n, value ? 1 : 0) {}

  static VisibleMatrix all_true(std::size_t n) { return VisibleMatrix(n, true); }

  std::size_t size() const { return n_; }
  bool at(std::size_t i, std::size_t j) const { return bits_[i * n_ + j] != 0; }
  void set(std::size_t i, std::size_t j, bool v) { bits_[i * n_ + j] = v ? 1 : 0; }

  /// Row i as a '0'/'1' string, for serialization and golden files.
  std::string row_string(std::size_t i) const;

  bool operator==(const VisibleMatrix&) const = default;

 private:
  std::size_t n_ = 0;
  std::vector<std::uint8_t> bits_;
};

/// A query/response/RoI sequence after knowledge injection, with the
/// visibility relation and the regions backing its Img tokens (in order).
struct EnrichedSequence {
  std::vector<SeqToken> tokens;
  VisibleMatrix visible;
  std::vector<Region> regions;
  double image_width = 0.0;
  double image_height = 0.0;
  int reserved_img_pos = 0;  // shared position of every Img token
};

struct AssembleOptions {
  std::size_t k = 2;
  PositionMode position_mode = PositionMode::Relative;
  std::size_t d_app = 16;        // expected appearance vector length
  double image_width = 0.0;      // both > 0 to enable bbox range checks
  double image_height = 0.0;
};

/// Visibility policy: a token pair is mutually visible unless one of them was
/// injected, in which case they interact only when the other is its anchor or
/// a same-anchor sibling (or they are the same token).
bool visible_by_policy(const std::vector<SeqToken>& tokens, std::size_t i,
                       std::size_t j);

VisibleMatrix build_visible_matrix(const std::vector<SeqToken>& tokens);

/// Layout [CLS] query [SEP] response [SEP] img... [SEP], with the top-k
/// related entities of every eligible text token spliced in right after it.
/// Throws DataError when a region fails validation.
EnrichedSequence assemble(const std::vector<std::string>& query_tokens,
                          const std::vector<std::string>& response_tokens,
                          const std::vector<Region>& regions,
                          const KnowledgeBase& kb, const AssembleOptions& options,
                          const Stoplist& stoplist = default_stoplist());

/// Drop injected tokens; surviving positions are unchanged and the reduced
/// visibility relation is all-true.
EnrichedSequence strip_injected(const EnrichedSequence& seq);

}  // namespace kvl
