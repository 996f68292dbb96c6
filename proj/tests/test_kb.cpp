// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <sstream>

#include "kvl/kb.hpp"
#include "kvl/rng.hpp"
#include "support/oracles.hpp"

using namespace kvl;

namespace {

KnowledgeBase ingest_text(const std::string& text, LoadReport* report = nullptr) {
  std::istringstream in(text);
  return KnowledgeBase::ingest(in, report);
}

}  // namespace

TEST_CASE("ingest indexes a fact under both endpoints") {
  const KnowledgeBase kb = ingest_text("bride\tRelatedTo\tchurch\t3.2\n");
  REQUIRE(kb.fact_count() == 1);
  const auto from_tail = kb.query("church", 1);
  const auto from_head = kb.query("bride", 1);
  REQUIRE(from_tail.size() == 1);
  CHECK(from_tail[0].entity == "bride");
  CHECK(from_tail[0].weight == doctest::Approx(3.2));
  REQUIRE(from_head.size() == 1);
  CHECK(from_head[0].entity == "church");
}

TEST_CASE("empty input yields an empty knowledge base") {
  const KnowledgeBase kb = ingest_text("");
  CHECK(kb.fact_count() == 0);
  CHECK(kb.query("anything", 5).empty());
}

TEST_CASE("postings are ordered by descending weight") {
  const std::vector<Fact> facts = {{"alpha", "RelatedTo", "church", 1.0},
                                   {"bride", "RelatedTo", "church", 3.2}};
  const KnowledgeBase kb(facts);
  const auto result = kb.query("church", 2);
  // Expected order derived by brute-force sort over the raw fact list.
  const auto expected = test::brute_force_query(kb.facts(), "church", 2, {});
  REQUIRE(expected.size() == 2);
  CHECK(expected[0].entity == "bride");
  CHECK(result == expected);
}

TEST_CASE("top-k query over the church example") {
  const KnowledgeBase kb = ingest_text(
      "bride\tRelatedTo\tchurch\t3.2\n"
      "church\tUsedFor\tget married\t2.8\n"
      "church\tIsA\tbuilding\t1.1\n");
  const auto result = kb.query("church", 2);
  REQUIRE(result.size() == 2);
  CHECK(result[0] == ScoredEntity{"bride", 3.2});
  CHECK(result[1] == ScoredEntity{"get married", 2.8});
  CHECK(result == test::brute_force_query(kb.facts(), "church", 2, {}));
}

TEST_CASE("k = 0 returns nothing") {
  const KnowledgeBase kb = ingest_text("bride\tRelatedTo\tchurch\t3.2\n");
  CHECK(kb.query("church", 0).empty());
}

TEST_CASE("stoplisted tokens return nothing") {
  const KnowledgeBase kb = ingest_text("the\tRelatedTo\tarticle\t2.0\n");
  CHECK(kb.query("the", 2).empty());
  CHECK(kb.query("the", 2, Stoplist{}).size() == 1);  // only the stoplist hides it
}

TEST_CASE("malformed lines are rejected and reported") {
  LoadReport report;
  const KnowledgeBase kb = ingest_text(
      "# comment line\n"
      "\n"
      "bride\tRelatedTo\tchurch\t3.2\n"
      "too\tfew\tfields\n"
      "bad\tWeight\there\tnotanumber\n"
      "neg\tWeight\there\t-1.5\n"
      "\tRelatedTo\tempty head\t1.0\n"
      "ok\tIsA\tfine\t0.0\n",
      &report);
  CHECK(report.accepted == 2);
  CHECK(report.rejected == 4);
  CHECK(report.errors.size() == 4);
  CHECK(kb.fact_count() == 2);
}

TEST_CASE("concepts are normalized on ingest and lookup") {
  const KnowledgeBase kb = ingest_text("  Bride \tRelatedTo\t CHURCH  \t3.2\n");
  REQUIRE(kb.query("Church", 1).size() == 1);
  CHECK(kb.query("church", 1)[0].entity == "bride");
  CHECK(kb.facts()[0].head == "bride");
}

TEST_CASE("duplicate entities keep the highest weight") {
  const KnowledgeBase kb = ingest_text(
      "bride\tRelatedTo\tchurch\t3.2\n"
      "bride\tAtLocation\tchurch\t1.5\n"
      "altar\tAtLocation\tchurch\t2.0\n");
  const auto result = kb.query("church", 3);
  REQUIRE(result.size() == 2);
  CHECK(result[0] == ScoredEntity{"bride", 3.2});
  CHECK(result[1] == ScoredEntity{"altar", 2.0});
}

TEST_CASE("query properties over random knowledge bases") {
  Rng rng(20240917);
  const std::vector<std::string> words = {"ant",  "bear", "crow", "door",
                                          "echo", "fern", "gate", "hill",
                                          "iris", "jade"};
  for (int round = 0; round < 200; ++round) {
    std::vector<Fact> facts;
    const int n_facts = static_cast<int>(rng.below(12));
    for (int f = 0; f < n_facts; ++f) {
      facts.push_back(Fact{words[rng.below(words.size())], "RelatedTo",
                           words[rng.below(words.size())],
                           static_cast<double>(rng.below(5)) * 0.5});
    }
    const KnowledgeBase kb(facts);
    const std::string& token = words[rng.below(words.size())];
    const auto k = static_cast<std::size_t>(rng.below(5));

    const auto result = kb.query(token, k);
    CHECK(result.size() <= k);
    CHECK(result == kb.query(token, k));  // deterministic
    CHECK(result == test::brute_force_query(kb.facts(), token, k,
                                            default_stoplist()));

    // k-result is a prefix of the (k+1)-result.
    const auto larger = kb.query(token, k + 1);
    REQUIRE(larger.size() >= result.size());
    for (std::size_t i = 0; i < result.size(); ++i) {
      CHECK(result[i] == larger[i]);
    }

    // Every returned weight belongs to a fact that mentions the token.
    for (const auto& [entity, weight] : result) {
      bool found = false;
      for (const Fact& fact : kb.facts()) {
        if ((fact.head == token || fact.tail == token) && fact.weight == weight) {
          found = true;
          break;
        }
      }
      CHECK(found);
    }
  }
}
