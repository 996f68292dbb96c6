// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace kvl {

/// One weighted commonsense triple. Head and tail are normalized concept
/// strings (lowercase, single-space separated); weight is the credibility of
/// the fact, never negative.
struct Fact {
  std::string head;
  std::string relation;
  std::string tail;
  double weight = 0.0;
};

struct LoadReport {
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  std::vector<std::string> errors;  // one message per rejected line
};

using Stoplist = std::unordered_set<std::string>;

/// Built-in function-word stoplist used when the caller supplies none.
const Stoplist& default_stoplist();

/// Load a stoplist file, one word per line ('#' comments and blanks skipped).
Stoplist load_stoplist(std::istream& in);
Stoplist load_stoplist_file(const std::string& path);

/// Trim, lowercase (ASCII), collapse internal whitespace to single spaces.
std::string normalize_concept(std::string_view raw);

struct ScoredEntity {
  std::string entity;
  double weight = 0.0;

  bool operator==(const ScoredEntity&) const = default;
};

/// Immutable triple store with a per-concept index. Facts are indexed under
/// both endpoints; postings are ordered by descending weight with ties broken
/// ascending by (other endpoint, relation), so queries are deterministic.
/// Concurrent reads are safe once constructed.
class KnowledgeBase {
 public:
  KnowledgeBase() = default;
  explicit KnowledgeBase(std::vector<Fact> facts);

  /// Parse a 4-column TSV stream, `head \t relation \t tail \t weight`.
  /// Lines starting with '#' and blank lines are skipped. Malformed lines
  /// (wrong field count, unparseable or negative weight, empty concept) are
  /// dropped and counted in the report.
  static KnowledgeBase ingest(std::istream& in, LoadReport* report = nullptr);
  static KnowledgeBase ingest_file(const std::string& path,
                                   LoadReport* report = nullptr);

  std::size_t fact_count() const { return facts_.size(); }
  std::size_t concept_count() const { return index_.size(); }
  bool empty() const { return facts_.empty(); }
  const std::vector<Fact>& facts() const { return facts_; }

  /// Top-k entities related to `token`, strongest facts first. The returned
  /// entity is the endpoint on the other side of the matched fact. Duplicate
  /// entities keep their highest-weighted occurrence; the k-prefix property
  /// holds (result for k is a prefix of the result for k+1). Stoplisted and
  /// unknown tokens yield an empty list.
  std::vector<ScoredEntity> query(const std::string& token, std::size_t k,
                                  const Stoplist& stoplist) const;

  std::vector<ScoredEntity> query(const std::string& token,
                                  std::size_t k) const {
    return query(token, k, default_stoplist());
  }

 private:
  struct Posting {
    std::size_t fact_id = 0;
    bool matched_head = false;  // token matched the head; entity is the tail
  };

  void build_index();

  std::vector<Fact> facts_;
  std::unordered_map<std::string, std::vector<Posting>> index_;
};

/// Serialize facts in the TSV interchange format understood by ingest().
void write_kb_tsv(const std::vector<Fact>& facts, std::ostream& out);

}  // namespace kvl
