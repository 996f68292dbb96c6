// SPDX-License-Identifier: Apache-2.0
// Independent reference implementations used to derive expected test values.
// Everything here recomputes results from first principles and must stay
// decoupled from the library code paths it checks.
#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "kvl/kb.hpp"
#include "kvl/sequence.hpp"
#include "kvl/tokenize.hpp"

namespace kvl::test {

/// Brute-force top-k retrieval: scan every fact, keep the ones mentioning the
/// token, sort by (weight desc, other endpoint asc, relation asc), then
/// dedup entities keeping the first (highest-weighted) occurrence.
inline std::vector<ScoredEntity> brute_force_query(
    const std::vector<Fact>& facts, const std::string& token, std::size_t k,
    const Stoplist& stoplist) {
  std::vector<ScoredEntity> out;
  const std::string key = normalize_concept(token);
  if (k == 0 || key.empty() || stoplist.contains(key)) return out;

  struct Hit {
    std::string entity;
    std::string relation;
    double weight;
    std::size_t id;
  };
  std::vector<Hit> hits;
  for (std::size_t id = 0; id < facts.size(); ++id) {
    const Fact& f = facts[id];
    if (f.head == key) hits.push_back(Hit{f.tail, f.relation, f.weight, id});
    if (f.tail == key) hits.push_back(Hit{f.head, f.relation, f.weight, id});
  }
  std::sort(hits.begin(), hits.end(), [](const Hit& a, const Hit& b) {
    if (a.weight != b.weight) return a.weight > b.weight;
    if (a.entity != b.entity) return a.entity < b.entity;
    if (a.relation != b.relation) return a.relation < b.relation;
    return a.id < b.id;
  });
  for (const Hit& hit : hits) {
    const bool seen = std::any_of(
        out.begin(), out.end(),
        [&](const ScoredEntity& e) { return e.entity == hit.entity; });
    if (seen) continue;
    out.push_back(ScoredEntity{hit.entity, hit.weight});
    if (out.size() == k) break;
  }
  return out;
}

/// Expected token of the assembled layout, rebuilt by simulating the
/// numbering prose directly over a string skeleton.
struct OracleToken {
  std::string surface;
  bool injected = false;
  int rel_pos = 0;
};

/// Position oracle: originals are numbered consecutively (ignoring injected
/// tokens and [IMG]); every injected entity counts up from its anchor's
/// number, restarting per entity; [IMG] tokens all share one number past the
/// last original.
inline std::vector<OracleToken> oracle_layout(
    const std::vector<std::string>& query_tokens,
    const std::vector<std::string>& response_tokens, std::size_t num_regions,
    const KnowledgeBase& kb, std::size_t k, const Stoplist& stoplist) {
  std::vector<OracleToken> out;
  int next = 0;

  auto emit_original = [&](const std::string& surface) {
    out.push_back(OracleToken{surface, false, next});
    ++next;
  };
  auto emit_text = [&](const std::vector<std::string>& words) {
    for (const std::string& word : words) {
      const int anchor_pos = next;
      emit_original(word);
      for (const ScoredEntity& entity : kb.query(word, k, stoplist)) {
        int pos = anchor_pos + 1;
        for (const std::string& piece : tokenize(entity.entity)) {
          out.push_back(OracleToken{piece, true, pos});
          ++pos;
        }
      }
    }
  };

  emit_original("[CLS]");
  emit_text(query_tokens);
  emit_original("[SEP]");
  emit_text(response_tokens);
  emit_original("[SEP]");
  std::vector<std::size_t> img_slots;
  for (std::size_t r = 0; r < num_regions; ++r) {
    img_slots.push_back(out.size());
    out.push_back(OracleToken{"[IMG]", false, 0});
  }
  emit_original("[SEP]");
  for (std::size_t slot : img_slots) out[slot].rel_pos = next;
  return out;
}

/// The visibility relation exactly as specified: true iff both tokens are
/// non-injected, or they are the same token, or one is injected with the
/// other as its anchor, or both are injected with the same anchor.
inline bool oracle_visible(const std::vector<SeqToken>& tokens, std::size_t i,
                           std::size_t j) {
  const bool inj_i = tokens[i].injected();
  const bool inj_j = tokens[j].injected();
  if (!inj_i && !inj_j) return true;
  if (i == j) return true;
  if (inj_i && !inj_j) return tokens[i].anchor == static_cast<int>(j);
  if (!inj_i && inj_j) return tokens[j].anchor == static_cast<int>(i);
  return tokens[i].anchor == tokens[j].anchor;
}

}  // namespace kvl::test
