// SPDX-License-Identifier: Apache-2.0
#include "kvl/kb.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "kvl/error.hpp"

namespace kvl {

namespace {

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = line.find('\t', start);
    if (pos == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return fields;
}

// Relations keep their case ("RelatedTo"); only surrounding/internal
// whitespace is normalized.
std::string trim_collapse(std::string_view raw) {
  std::string out;
  out.reserve(raw.size());
  bool pending_space = false;
  for (unsigned char c : raw) {
    if (std::isspace(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    out.push_back(static_cast<char>(c));
  }
  return out;
}

bool parse_weight(std::string_view field, double* out) {
  // Tolerate surrounding spaces but require the whole remainder to parse.
  while (!field.empty() && (field.front() == ' ' || field.front() == '\r')) {
    field.remove_prefix(1);
  }
  while (!field.empty() && (field.back() == ' ' || field.back() == '\r')) {
    field.remove_suffix(1);
  }
  if (field.empty()) return false;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(first, last, *out);
  return ec == std::errc() && ptr == last && std::isfinite(*out);
}

}  // namespace

const Stoplist& default_stoplist() {
  static const Stoplist words = {
      "a",    "an",    "and",  "are",  "at",    "be",   "been", "but",
      "by",   "did",   "do",   "does", "for",   "from", "had",  "has",
      "have", "he",    "her",  "his",  "how",   "i",    "if",   "in",
      "is",   "it",    "its",  "no",   "not",   "of",   "on",   "or",
      "she",  "so",    "that", "the",  "their", "them", "then", "they",
      "this", "to",    "was",  "we",   "were",  "what", "when", "where",
      "which", "who",  "why",  "will", "with",  "would", "you"};
  return words;
}

Stoplist load_stoplist(std::istream& in) {
  Stoplist words;
  std::string line;
  while (std::getline(in, line)) {
    std::string word = normalize_concept(line);
    if (word.empty() || word.front() == '#') continue;
    words.insert(std::move(word));
  }
  return words;
}

Stoplist load_stoplist_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open stoplist file: " + path);
  return load_stoplist(in);
}

std::string normalize_concept(std::string_view raw) {
  std::string out;
  out.reserve(raw.size());
  bool pending_space = false;
  for (unsigned char c : raw) {
    if (std::isspace(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    out.push_back(static_cast<char>(std::tolower(c)));
  }
  return out;
}

KnowledgeBase::KnowledgeBase(std::vector<Fact> facts) : facts_(std::move(facts)) {
  for (Fact& fact : facts_) {
    fact.head = normalize_concept(fact.head);
    fact.tail = normalize_concept(fact.tail);
    if (fact.head.empty() || fact.tail.empty()) {
      throw DataError("fact with empty concept endpoint");
    }
    if (!(fact.weight >= 0.0)) {
      throw DataError("fact with negative weight");
    }
  }
  build_index();
}

KnowledgeBase KnowledgeBase::ingest(std::istream& in, LoadReport* report) {
  LoadReport local;
  LoadReport& rep = report ? *report : local;
  std::vector<Fact> facts;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;

    auto reject = [&](const std::string& why) {
      ++rep.rejected;
      rep.errors.push_back("line " + std::to_string(line_no) + ": " + why);
    };

    auto fields = split_tabs(line);
    if (fields.size() != 4) {
      reject("expected 4 tab-separated fields, got " +
             std::to_string(fields.size()));
      continue;
    }
    Fact fact;
    fact.head = normalize_concept(fields[0]);
    fact.relation = trim_collapse(fields[1]);
    fact.tail = normalize_concept(fields[2]);
    if (fact.head.empty() || fact.tail.empty()) {
      reject("empty head or tail concept");
      continue;
    }
    if (fact.relation.empty()) {
      reject("empty relation");
      continue;
    }
    if (!parse_weight(fields[3], &fact.weight)) {
      reject("unparseable weight '" + std::string(fields[3]) + "'");
      continue;
    }
    if (fact.weight < 0.0) {
      reject("negative weight");
      continue;
    }
    facts.push_back(std::move(fact));
    ++rep.accepted;
  }
  KnowledgeBase kb;
  kb.facts_ = std::move(facts);
  kb.build_index();
  return kb;
}

KnowledgeBase KnowledgeBase::ingest_file(const std::string& path,
                                         LoadReport* report) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open knowledge base file: " + path);
  return ingest(in, report);
}

void KnowledgeBase::build_index() {
  index_.clear();
  for (std::size_t id = 0; id < facts_.size(); ++id) {
    index_[facts_[id].head].push_back(Posting{id, true});
    index_[facts_[id].tail].push_back(Posting{id, false});
  }
  auto other_endpoint = [this](const Posting& p) -> const std::string& {
    return p.matched_head ? facts_[p.fact_id].tail : facts_[p.fact_id].head;
  };
  for (auto& [key, postings] : index_) {
    std::sort(postings.begin(), postings.end(),
              [&](const Posting& a, const Posting& b) {
                const Fact& fa = facts_[a.fact_id];
                const Fact& fb = facts_[b.fact_id];
                if (fa.weight != fb.weight) return fa.weight > fb.weight;
                const std::string& ea = other_endpoint(a);
                const std::string& eb = other_endpoint(b);
                if (ea != eb) return ea < eb;
                if (fa.relation != fb.relation) return fa.relation < fb.relation;
                return a.fact_id < b.fact_id;
              });
  }
}

std::vector<ScoredEntity> KnowledgeBase::query(const std::string& token,
                                               std::size_t k,
                                               const Stoplist& stoplist) const {
  std::vector<ScoredEntity> out;
  if (k == 0) return out;
  const std::string key = normalize_concept(token);
  if (key.empty() || stoplist.contains(key)) return out;
  auto it = index_.find(key);
  if (it == index_.end()) return out;

  // Postings are pre-sorted, so the first occurrence of an entity is its
  // highest-weighted one and truncating after dedup preserves the k-prefix
  // property.
  std::unordered_set<std::string_view> seen;
  for (const Posting& posting : it->second) {
    const Fact& fact = facts_[posting.fact_id];
    const std::string& entity = posting.matched_head ? fact.tail : fact.head;
    if (!seen.insert(entity).second) continue;
    out.push_back(ScoredEntity{entity, fact.weight});
    if (out.size() == k) break;
  }
  return out;
}

void write_kb_tsv(const std::vector<Fact>& facts, std::ostream& out) {
  for (const Fact& fact : facts) {
    std::ostringstream weight;
    weight << fact.weight;
    out << fact.head << '\t' << fact.relation << '\t' << fact.tail << '\t'
        << weight.str() << '\n';
  }
}

}  // namespace kvl
