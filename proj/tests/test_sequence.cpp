// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <sstream>

#include "kvl/error.hpp"
#include "kvl/rng.hpp"
#include "kvl/sequence.hpp"
#include "support/oracles.hpp"

using namespace kvl;

namespace {

KnowledgeBase church_kb() {
  std::istringstream in(
      "bride\tRelatedTo\tchurch\t3.2\n"
      "church\tUsedFor\tget married\t2.8\n"
      "church\tIsA\tbuilding\t1.1\n");
  return KnowledgeBase::ingest(in);
}

Region make_region(Rng& rng, std::size_t d_app, double w, double h) {
  Region region;
  const double x1 = rng.uniform(0.0, w - 2.0);
  const double y1 = rng.uniform(0.0, h - 2.0);
  region.bbox = {x1, y1, x1 + 1.0 + rng.uniform() * (w - x1 - 1.0),
                 y1 + 1.0 + rng.uniform() * (h - y1 - 1.0)};
  region.appearance.assign(d_app, 0.0);
  for (double& a : region.appearance) a = rng.uniform(-1.0, 1.0);
  return region;
}

struct RandomCase {
  KnowledgeBase kb;
  std::vector<std::string> query;
  std::vector<std::string> response;
  std::vector<Region> regions;
  AssembleOptions options;
};

RandomCase random_case(Rng& rng, std::size_t k) {
  const std::vector<std::string> words = {"ant",  "bear", "crow", "door",
                                          "echo", "fern", "gate", "hill"};
  const std::vector<std::string> entities = {"iris", "jade", "old key",
                                             "long green moss"};
  RandomCase rc;
  std::vector<Fact> facts;
  const int n_facts = static_cast<int>(rng.below(8));
  for (int f = 0; f < n_facts; ++f) {
    facts.push_back(Fact{entities[rng.below(entities.size())], "RelatedTo",
                         words[rng.below(words.size())],
                         1.0 + static_cast<double>(rng.below(8)) * 0.5});
  }
  rc.kb = KnowledgeBase(facts);
  for (std::size_t i = rng.below(5); i-- > 0;) {
    rc.query.push_back(words[rng.below(words.size())]);
  }
  for (std::size_t i = rng.below(4); i-- > 0;) {
    rc.response.push_back(words[rng.below(words.size())]);
  }
  rc.options.k = k;
  rc.options.d_app = 4;
  rc.options.image_width = 100.0;
  rc.options.image_height = 80.0;
  for (std::size_t i = rng.below(3); i-- > 0;) {
    rc.regions.push_back(make_region(rng, 4, 100.0, 80.0));
  }
  return rc;
}

int index_of(const EnrichedSequence& seq, const std::string& surface) {
  for (std::size_t i = 0; i < seq.tokens.size(); ++i) {
    if (seq.tokens[i].surface == surface) return static_cast<int>(i);
  }
  return -1;
}

}  // namespace

TEST_CASE("assemble reproduces the church layout and numbering") {
  const KnowledgeBase kb = church_kb();
  AssembleOptions options;
  options.k = 2;
  options.d_app = 0;
  const EnrichedSequence seq = assemble({"church"}, {}, {}, kb, options);

  const std::vector<std::string> surfaces = {
      "[CLS]", "church", "bride", "get", "married", "[SEP]", "[SEP]", "[SEP]"};
  REQUIRE(seq.tokens.size() == surfaces.size());
  for (std::size_t i = 0; i < surfaces.size(); ++i) {
    CHECK(seq.tokens[i].surface == surfaces[i]);
  }
  // Originals keep 0,1,2,...; each injected entity counts up from the anchor.
  const std::vector<int> positions = {0, 1, 2, 2, 3, 2, 3, 4};
  for (std::size_t i = 0; i < positions.size(); ++i) {
    CHECK(seq.tokens[i].rel_pos == positions[i]);
  }
  for (std::size_t i : {2u, 3u, 4u}) {
    CHECK(seq.tokens[i].injected());
    CHECK(seq.tokens[i].anchor == 1);
  }

  const int church = 1, bride = 2, get = 3, cls = 0, sep = 5;
  CHECK(seq.visible.at(church, bride));
  CHECK_FALSE(seq.visible.at(cls, bride));
  CHECK_FALSE(seq.visible.at(sep, bride));
  CHECK(seq.visible.at(bride, get));  // same-anchor siblings
}

TEST_CASE("k = 0 leaves every token original with consecutive positions") {
  const KnowledgeBase kb = church_kb();
  Rng rng(7);
  AssembleOptions options;
  options.k = 0;
  options.d_app = 4;
  options.image_width = 100.0;
  options.image_height = 80.0;
  std::vector<Region> regions = {make_region(rng, 4, 100.0, 80.0)};
  const EnrichedSequence seq =
      assemble({"the", "church"}, {"a", "bride"}, regions, kb, options);

  int expected = 0;
  for (const SeqToken& tok : seq.tokens) {
    CHECK_FALSE(tok.injected());
    if (tok.kind == TokenKind::Img) {
      CHECK(tok.rel_pos == seq.reserved_img_pos);
    } else {
      CHECK(tok.rel_pos == expected++);
    }
  }
  CHECK(seq.reserved_img_pos == expected);
  for (std::size_t i = 0; i < seq.tokens.size(); ++i) {
    for (std::size_t j = 0; j < seq.tokens.size(); ++j) {
      CHECK(seq.visible.at(i, j));
    }
  }
}

TEST_CASE("visible matrix matches the stated law on random sequences") {
  Rng rng(99);
  for (int round = 0; round < 100; ++round) {
    const RandomCase rc = random_case(rng, rng.below(3));
    const EnrichedSequence seq =
        assemble(rc.query, rc.response, rc.regions, rc.kb, rc.options);
    const std::size_t n = seq.tokens.size();
    REQUIRE(seq.visible.size() == n);
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(seq.visible.at(i, i));
      for (std::size_t j = 0; j < n; ++j) {
        CHECK(seq.visible.at(i, j) == test::oracle_visible(seq.tokens, i, j));
        CHECK(seq.visible.at(i, j) == seq.visible.at(j, i));
      }
    }
  }
}

TEST_CASE("token stream and positions match the prose oracle") {
  Rng rng(123);
  for (int round = 0; round < 200; ++round) {
    const RandomCase rc = random_case(rng, rng.below(4));
    const EnrichedSequence seq =
        assemble(rc.query, rc.response, rc.regions, rc.kb, rc.options);
    const auto expected =
        test::oracle_layout(rc.query, rc.response, rc.regions.size(), rc.kb,
                            rc.options.k, default_stoplist());
    REQUIRE(seq.tokens.size() == expected.size());
    for (std::size_t i = 0; i < expected.size(); ++i) {
      CHECK(seq.tokens[i].surface == expected[i].surface);
      CHECK(seq.tokens[i].injected() == expected[i].injected);
      CHECK(seq.tokens[i].rel_pos == expected[i].rel_pos);
    }
  }
}

TEST_CASE("original positions are preserved for every k") {
  Rng rng(4242);
  for (int round = 0; round < 50; ++round) {
    RandomCase rc = random_case(rng, 0);
    std::vector<std::vector<int>> original_positions;
    for (std::size_t k = 0; k < 4; ++k) {
      rc.options.k = k;
      const EnrichedSequence seq =
          assemble(rc.query, rc.response, rc.regions, rc.kb, rc.options);
      std::vector<int> positions;
      for (const SeqToken& tok : seq.tokens) {
        if (!tok.injected()) positions.push_back(tok.rel_pos);
      }
      original_positions.push_back(std::move(positions));
    }
    for (std::size_t k = 1; k < 4; ++k) {
      CHECK(original_positions[k] == original_positions[0]);
    }
  }
}

TEST_CASE("each injected entity runs consecutively from its anchor") {
  Rng rng(555);
  for (int round = 0; round < 100; ++round) {
    const RandomCase rc = random_case(rng, 1 + rng.below(3));
    const EnrichedSequence seq =
        assemble(rc.query, rc.response, rc.regions, rc.kb, rc.options);
    for (std::size_t i = 0; i < seq.tokens.size(); ++i) {
      const SeqToken& tok = seq.tokens[i];
      if (!tok.injected()) continue;
      const int anchor_pos = seq.tokens[static_cast<std::size_t>(tok.anchor)].rel_pos;
      const bool starts_entity = tok.rel_pos == anchor_pos + 1;
      const bool continues_entity =
          i > 0 && seq.tokens[i - 1].injected() &&
          seq.tokens[i - 1].anchor == tok.anchor &&
          tok.rel_pos == seq.tokens[i - 1].rel_pos + 1;
      CHECK((starts_entity || continues_entity));
    }
  }
}

TEST_CASE("strip_injected recovers the k = 0 sequence") {
  Rng rng(777);
  for (int round = 0; round < 50; ++round) {
    RandomCase rc = random_case(rng, 2);
    const EnrichedSequence enriched =
        assemble(rc.query, rc.response, rc.regions, rc.kb, rc.options);
    rc.options.k = 0;
    const EnrichedSequence plain =
        assemble(rc.query, rc.response, rc.regions, rc.kb, rc.options);

    const EnrichedSequence stripped = strip_injected(enriched);
    REQUIRE(stripped.tokens.size() == plain.tokens.size());
    for (std::size_t i = 0; i < plain.tokens.size(); ++i) {
      CHECK(stripped.tokens[i].surface == plain.tokens[i].surface);
      CHECK(stripped.tokens[i].rel_pos == plain.tokens[i].rel_pos);
      CHECK(stripped.tokens[i].segment == plain.tokens[i].segment);
    }
    CHECK(stripped.visible == VisibleMatrix::all_true(plain.tokens.size()));

    // Idempotence at k = 0.
    const EnrichedSequence again = strip_injected(plain);
    CHECK(again.tokens.size() == plain.tokens.size());
    CHECK(again.visible == plain.visible);
  }
}

TEST_CASE("segments follow the layout and injected tokens inherit them") {
  const KnowledgeBase kb = church_kb();
  AssembleOptions options;
  options.k = 2;
  options.d_app = 4;
  options.image_width = 100.0;
  options.image_height = 80.0;
  Rng rng(10);
  std::vector<Region> regions = {make_region(rng, 4, 100.0, 80.0)};
  const EnrichedSequence seq =
      assemble({"old"}, {"church", "here"}, regions, kb, options);

  CHECK(seq.tokens.front().segment == Segment::Query);  // [CLS]
  const int church = index_of(seq, "church");
  const int bride = index_of(seq, "bride");
  REQUIRE(church >= 0);
  REQUIRE(bride >= 0);
  CHECK(seq.tokens[static_cast<std::size_t>(church)].segment == Segment::Response);
  CHECK(seq.tokens[static_cast<std::size_t>(bride)].segment == Segment::Response);
  CHECK(seq.tokens[static_cast<std::size_t>(bride)].anchor == church);
  CHECK(seq.tokens.back().segment == Segment::Rois);  // trailing [SEP]
  for (const SeqToken& tok : seq.tokens) {
    if (tok.kind == TokenKind::Img) CHECK(tok.segment == Segment::Rois);
  }
}

TEST_CASE("position modes: absolute renumbers, anchor mode copies") {
  const KnowledgeBase kb = church_kb();
  AssembleOptions options;
  options.k = 2;
  options.d_app = 0;

  options.position_mode = PositionMode::Absolute;
  const EnrichedSequence absolute = assemble({"church"}, {}, {}, kb, options);
  int expected = 0;
  for (const SeqToken& tok : absolute.tokens) {
    if (tok.kind == TokenKind::Img) continue;
    CHECK(tok.rel_pos == expected++);
  }

  options.position_mode = PositionMode::Anchor;
  const EnrichedSequence anchored = assemble({"church"}, {}, {}, kb, options);
  for (const SeqToken& tok : anchored.tokens) {
    if (tok.injected()) {
      CHECK(tok.rel_pos ==
            anchored.tokens[static_cast<std::size_t>(tok.anchor)].rel_pos);
    }
  }
}

TEST_CASE("all position modes coincide exactly at k = 0") {
  Rng rng(31337);
  for (int round = 0; round < 20; ++round) {
    RandomCase rc = random_case(rng, 0);
    std::vector<EnrichedSequence> seqs;
    for (PositionMode mode : {PositionMode::Relative, PositionMode::Absolute,
                              PositionMode::Anchor}) {
      rc.options.position_mode = mode;
      seqs.push_back(assemble(rc.query, rc.response, rc.regions, rc.kb, rc.options));
    }
    for (std::size_t m = 1; m < seqs.size(); ++m) {
      REQUIRE(seqs[m].tokens.size() == seqs[0].tokens.size());
      for (std::size_t i = 0; i < seqs[0].tokens.size(); ++i) {
        CHECK(seqs[m].tokens[i].rel_pos == seqs[0].tokens[i].rel_pos);
      }
      CHECK(seqs[m].visible == seqs[0].visible);
    }
  }
}

TEST_CASE("region validation rejects bad instances") {
  const KnowledgeBase kb = church_kb();
  AssembleOptions options;
  options.k = 0;
  options.d_app = 4;
  options.image_width = 100.0;
  options.image_height = 80.0;

  Region wrong_app;
  wrong_app.bbox = {0.0, 0.0, 100.0, 80.0};
  wrong_app.appearance = {1.0, 2.0};  // wrong width
  CHECK_THROWS_AS(assemble({"a"}, {}, {wrong_app}, kb, options), DataError);

  Region outside;
  outside.bbox = {-1.0, 0.0, 50.0, 40.0};
  outside.appearance.assign(4, 0.0);
  CHECK_THROWS_AS(assemble({"a"}, {}, {outside}, kb, options), DataError);

  Region degenerate;
  degenerate.bbox = {10.0, 10.0, 10.0, 40.0};
  degenerate.appearance.assign(4, 0.0);
  CHECK_THROWS_AS(assemble({"a"}, {}, {degenerate}, kb, options), DataError);
}

TEST_CASE("img tokens share one reserved position past the originals") {
  const KnowledgeBase kb = church_kb();
  Rng rng(8);
  AssembleOptions options;
  options.k = 2;
  options.d_app = 4;
  options.image_width = 100.0;
  options.image_height = 80.0;
  std::vector<Region> regions = {make_region(rng, 4, 100.0, 80.0),
                                 make_region(rng, 4, 100.0, 80.0)};
  const EnrichedSequence seq =
      assemble({"church"}, {"bride"}, regions, kb, options);
  int max_original = -1;
  for (const SeqToken& tok : seq.tokens) {
    if (!tok.injected() && tok.kind != TokenKind::Img) {
      max_original = std::max(max_original, tok.rel_pos);
    }
  }
  for (const SeqToken& tok : seq.tokens) {
    if (tok.kind == TokenKind::Img) {
      CHECK(tok.rel_pos == max_original + 1);
      CHECK(tok.rel_pos == seq.reserved_img_pos);
    }
  }
}
