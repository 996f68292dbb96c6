// SPDX-License-Identifier: Apache-2.0
#include "kvl/synthetic.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>
#include <unordered_map>

#include "kvl/error.hpp"
#include "kvl/rng.hpp"
#include "kvl/tokenize.hpp"

namespace kvl {

namespace {

// Cue words (appear in queries) and marker words (appear in candidates),
// connected pairwise by generated facts.
constexpr const char* kCues[] = {
    "church",  "kennel",   "nest",        "garage",     "library",  "kitchen",
    "ocean",   "hive",     "stable",      "barn",       "desert",   "jungle",
    "orchard", "vineyard", "bakery",      "forge",      "stage",    "court",
    "clinic",  "cockpit",  "ranch",       "meadow",     "pond",     "cave",
    "burrow",  "reef",     "harbor",      "runway",     "depot",    "arena",
    "casino",  "circus",   "gym",         "lab",        "mine",     "mill",
    "farm",    "school",   "prison",      "museum",     "pharmacy", "theater",
    "salon",   "studio",   "temple",      "castle",     "palace",   "dungeon",
    "lighthouse", "observatory", "aquarium", "zoo",     "campsite", "summit",
    "trench",  "galley",   "cellar",      "garden",     "forest",   "tundra",
    "swamp",   "canyon",   "glacier",     "volcano"};

constexpr const char* kMarkers[] = {
    "bride",   "dog",      "bird",        "car",        "book",     "chef",
    "fish",    "bee",      "horse",       "cow",        "camel",    "tiger",
    "apple",   "grape",    "bread",       "anvil",      "actor",    "judge",
    "nurse",   "pilot",    "sheep",       "deer",       "frog",     "bat",
    "rabbit",  "coral",    "boat",        "plane",      "train",    "boxer",
    "gambler", "clown",    "athlete",     "scientist",  "miner",    "grain",
    "tractor", "teacher",  "guard",       "curator",    "pill",     "audience",
    "barber",  "painter",  "monk",        "king",       "queen",    "prisoner",
    "keeper",  "telescope", "shark",      "lion",       "tent",     "climber",
    "soldier", "cook",     "wine",        "rose",       "wolf",     "reindeer",
    "alligator", "eagle",  "penguin",     "lava"};

// Neutral words with no facts attached; several sit on the default stoplist.
constexpr const char* kFillers[] = {
    "the",     "a",       "an",     "is",      "was",     "are",
    "near",    "person",  "man",    "woman",   "child",   "group",
    "they",    "we",      "looking", "walking", "standing", "sitting",
    "holding", "wearing", "watching", "small",  "large",   "old",
    "young",   "quiet",   "busy",   "outside"};

// Tails of the low-weight noise facts; these surfaces only ever enter a
// sequence through injection.
constexpr const char* kNoiseWords[] = {
    "relic",  "emblem", "banner", "ribbon", "marble", "timber",
    "copper", "velvet", "amber",  "ivory",  "pebble", "thistle",
    "willow", "maple",  "cedar",  "slate",  "quartz", "basalt",
    "lichen", "moss",   "fern",   "reed",   "clay",   "chalk"};

constexpr std::size_t kCuratedPairs = std::size(kCues);

struct WordBank {
  std::vector<std::string> cues;
  std::vector<std::string> markers;
  std::unordered_map<std::string, int> pair_of;  // cue or marker -> pair id

  explicit WordBank(int pairs) {
    cues.reserve(static_cast<std::size_t>(pairs));
    markers.reserve(static_cast<std::size_t>(pairs));
    for (int i = 0; i < pairs; ++i) {
      if (static_cast<std::size_t>(i) < kCuratedPairs) {
        cues.emplace_back(kCues[i]);
        markers.emplace_back(kMarkers[i]);
      } else {
        cues.push_back("place" + std::to_string(i));
        markers.push_back("thing" + std::to_string(i));
      }
      pair_of[cues.back()] = i;
      pair_of[markers.back()] = i;
    }
  }

  std::set<int> pairs_in(const std::vector<std::string>& tokens) const {
    std::set<int> out;
    for (const std::string& token : tokens) {
      auto it = pair_of.find(token);
      if (it != pair_of.end()) out.insert(it->second);
    }
    return out;
  }
};

std::vector<std::string> sample_fillers(Rng& rng, int count) {
  std::vector<std::string> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    out.emplace_back(kFillers[rng.below(std::size(kFillers))]);
  }
  return out;
}

/// k distinct picks from `pool` minus `forbidden`.
std::vector<int> pick_distinct(const std::vector<int>& pool,
                               const std::set<int>& forbidden, int count,
                               Rng& rng) {
  std::vector<int> eligible;
  for (int p : pool) {
    if (!forbidden.contains(p)) eligible.push_back(p);
  }
  if (static_cast<int>(eligible.size()) < count) {
    throw ConfigError("pair pool too small for distinct distractor draw");
  }
  std::vector<int> out;
  for (int i = 0; i < count; ++i) {
    const std::size_t at = rng.below(eligible.size());
    out.push_back(eligible[at]);
    eligible.erase(eligible.begin() + static_cast<std::ptrdiff_t>(at));
  }
  return out;
}

int pick_one(const std::vector<int>& pool, const std::set<int>& forbidden,
             Rng& rng) {
  std::vector<int> eligible;
  for (int p : pool) {
    if (!forbidden.contains(p)) eligible.push_back(p);
  }
  if (eligible.empty()) throw ConfigError("pair pool exhausted");
  return eligible[rng.below(eligible.size())];
}

std::string join(const std::vector<std::string>& tokens) {
  std::string out;
  for (const std::string& token : tokens) {
    if (!out.empty()) out.push_back(' ');
    out += token;
  }
  return out;
}

std::vector<Region> make_regions(const SynthConfig& config, const WordBank& bank,
                                 Rng& rng) {
  std::vector<Region> regions;
  Region whole;
  whole.bbox = {0.0, 0.0, config.image_width, config.image_height};
  whole.appearance.resize(static_cast<std::size_t>(config.d_app));
  for (double& a : whole.appearance) a = rng.uniform(-1.0, 1.0);
  regions.push_back(std::move(whole));

  const int extra = static_cast<int>(1 + rng.below(2));
  for (int r = 0; r < extra; ++r) {
    Region region;
    const double x1 = rng.uniform(0.0, config.image_width - 2.0);
    const double y1 = rng.uniform(0.0, config.image_height - 2.0);
    region.bbox = {x1, y1,
                   x1 + 1.0 + rng.uniform() * (config.image_width - x1 - 1.0),
                   y1 + 1.0 + rng.uniform() * (config.image_height - y1 - 1.0)};
    region.appearance.resize(static_cast<std::size_t>(config.d_app));
    for (double& a : region.appearance) a = rng.uniform(-1.0, 1.0);
    if (rng.chance(0.5)) {
      region.label = bank.markers[rng.below(bank.markers.size())];
    }
    regions.push_back(std::move(region));
  }
  return regions;
}

/// Four candidates: gold holds the gold pair's marker, distractors hold
/// markers of other same-split pairs, everything else (filler words, decoy
/// placement, lengths) is drawn identically regardless of gold-ness.
struct CandidateSet {
  std::array<std::vector<std::string>, 4> tokens;
  int gold = 0;
};

CandidateSet make_candidates(const WordBank& bank, const std::vector<int>& split_pool,
                             const std::vector<int>& full_pool, int gold_pair,
                             const std::set<int>& forbidden, const SynthConfig& config,
                             Rng& rng) {
  CandidateSet set;
  set.gold = static_cast<int>(rng.below(4));
  const std::vector<int> distractors = pick_distinct(split_pool, forbidden, 3, rng);
  int next_distractor = 0;
  for (int c = 0; c < 4; ++c) {
    const int pair =
        c == set.gold ? gold_pair : distractors[static_cast<std::size_t>(next_distractor++)];
    std::vector<std::string> tokens =
        sample_fillers(rng, static_cast<int>(1 + rng.below(2)));
    tokens.push_back(bank.markers[static_cast<std::size_t>(pair)]);
    if (rng.chance(config.decoy_prob)) {
      const int decoy = pick_one(full_pool, forbidden, rng);
      tokens.push_back(rng.chance(0.5) ? bank.cues[static_cast<std::size_t>(decoy)]
                                       : bank.markers[static_cast<std::size_t>(decoy)]);
    }
    shuffle(tokens, rng);
    set.tokens[static_cast<std::size_t>(c)] = std::move(tokens);
  }
  return set;
}

void verify_exactly_one_linked(const KnowledgeBase& kb, const Instance& inst) {
  const std::vector<std::string> query_tokens = tokenize(inst.query);
  int linked = 0;
  int linked_index = -1;
  for (int c = 0; c < 4; ++c) {
    if (candidate_kb_linked(kb, query_tokens,
                            tokenize(inst.responses[static_cast<std::size_t>(c)]))) {
      ++linked;
      linked_index = c;
    }
  }
  if (linked != 1 || linked_index != inst.gold) {
    throw std::logic_error("synthetic generator produced an instance without "
                           "a unique KB-linked gold candidate (id " +
                           std::to_string(inst.id) + ")");
  }
}

std::vector<Instance> make_split(const SynthConfig& config, const WordBank& bank,
                                 const KnowledgeBase& kb,
                                 const std::vector<int>& split_pool,
                                 const std::vector<int>& full_pool, int count,
                                 Rng& rng) {
  std::vector<Instance> instances;
  instances.reserve(static_cast<std::size_t>(count) * 2);
  for (int id = 0; id < count; ++id) {
    const int answer_pair = pick_one(split_pool, {}, rng);
    const int rationale_pair = pick_one(split_pool, {answer_pair}, rng);

    std::vector<std::string> question =
        sample_fillers(rng, static_cast<int>(2 + rng.below(3)));
    question.push_back(bank.cues[static_cast<std::size_t>(answer_pair)]);
    question.push_back(bank.cues[static_cast<std::size_t>(rationale_pair)]);
    shuffle(question, rng);

    const std::vector<Region> regions = make_regions(config, bank, rng);

    // Distractors and decoys must avoid every pair a query word belongs to,
    // otherwise a second candidate could link to the query.
    const CandidateSet answers =
        make_candidates(bank, split_pool, full_pool, answer_pair,
                        bank.pairs_in(question), config, rng);

    Instance qa;
    qa.id = id;
    qa.mode = TaskMode::QToA;
    qa.query = join(question);
    for (int c = 0; c < 4; ++c) {
      qa.responses[static_cast<std::size_t>(c)] =
          join(answers.tokens[static_cast<std::size_t>(c)]);
    }
    qa.gold = answers.gold;
    qa.image = ImageSize{config.image_width, config.image_height};
    qa.regions = regions;
    verify_exactly_one_linked(kb, qa);

    std::vector<std::string> qar_query = question;
    const auto& gold_answer = answers.tokens[static_cast<std::size_t>(answers.gold)];
    qar_query.insert(qar_query.end(), gold_answer.begin(), gold_answer.end());

    const CandidateSet rationales =
        make_candidates(bank, split_pool, full_pool, rationale_pair,
                        bank.pairs_in(qar_query), config, rng);

    Instance qar;
    qar.id = id;
    qar.mode = TaskMode::QAToR;
    qar.query = join(qar_query);
    for (int c = 0; c < 4; ++c) {
      qar.responses[static_cast<std::size_t>(c)] =
          join(rationales.tokens[static_cast<std::size_t>(c)]);
    }
    qar.gold = rationales.gold;
    qar.image = ImageSize{config.image_width, config.image_height};
    qar.regions = regions;
    verify_exactly_one_linked(kb, qar);

    instances.push_back(std::move(qa));
    instances.push_back(std::move(qar));
  }
  return instances;
}

}  // namespace

void SynthConfig::validate() const {
  if (train_instances < 0 || eval_instances < 0) {
    throw ConfigError("instance counts must be non-negative");
  }
  if (eval_pairs < 6 || pairs - eval_pairs < 6) {
    throw ConfigError("need at least 6 pairs per split (got " +
                      std::to_string(pairs - eval_pairs) + " train / " +
                      std::to_string(eval_pairs) + " eval)");
  }
  if (d_app <= 0) throw ConfigError("d_app must be positive");
  if (image_width < 4.0 || image_height < 4.0) {
    throw ConfigError("image size too small");
  }
  if (decoy_prob < 0.0 || decoy_prob > 1.0 || extra_fact_prob < 0.0 ||
      extra_fact_prob > 1.0) {
    throw ConfigError("probabilities must be within [0, 1]");
  }
}

bool candidate_kb_linked(const KnowledgeBase& kb,
                         const std::vector<std::string>& query_tokens,
                         const std::vector<std::string>& candidate_tokens) {
  const Stoplist empty;
  const std::set<std::string> query_set(query_tokens.begin(), query_tokens.end());
  for (const std::string& token : candidate_tokens) {
    for (const ScoredEntity& entity :
         kb.query(token, kb.fact_count(), empty)) {
      if (query_set.contains(entity.entity)) return true;
    }
  }
  return false;
}

SynthOutput make_synthetic(const SynthConfig& config) {
  config.validate();
  const WordBank bank(config.pairs);
  Rng rng(config.seed);

  SynthOutput out;
  // Pair facts carry high weights so the partner entity always ranks first;
  // noise facts sit strictly below and only surface for k >= 2.
  for (int p = 0; p < config.pairs; ++p) {
    const auto pi = static_cast<std::size_t>(p);
    out.facts.push_back(Fact{bank.cues[pi], "RelatedTo", bank.markers[pi],
                             rng.uniform(2.0, 5.0)});
    if (rng.chance(config.extra_fact_prob)) {
      out.facts.push_back(Fact{bank.cues[pi], "HasA",
                               kNoiseWords[rng.below(std::size(kNoiseWords))],
                               rng.uniform(0.2, 1.5)});
    }
    if (rng.chance(config.extra_fact_prob)) {
      out.facts.push_back(Fact{kNoiseWords[rng.below(std::size(kNoiseWords))],
                               "AtLocation", bank.markers[pi],
                               rng.uniform(0.2, 1.5)});
    }
  }
  out.kb = KnowledgeBase(out.facts);

  std::vector<int> train_pool, eval_pool, full_pool;
  for (int p = 0; p < config.pairs; ++p) {
    full_pool.push_back(p);
    if (p < config.pairs - config.eval_pairs) {
      train_pool.push_back(p);
    } else {
      eval_pool.push_back(p);
    }
  }

  out.train = make_split(config, bank, out.kb, train_pool, full_pool,
                         config.train_instances, rng);
  out.eval = make_split(config, bank, out.kb, eval_pool, full_pool,
                        config.eval_instances, rng);

  std::set<std::string> vocab{"[CLS]", "[SEP]", "[IMG]"};
  for (const char* w : kFillers) vocab.insert(w);
  for (const char* w : kNoiseWords) vocab.insert(w);
  vocab.insert(bank.cues.begin(), bank.cues.end());
  vocab.insert(bank.markers.begin(), bank.markers.end());
  out.vocab_surfaces.assign(vocab.begin(), vocab.end());
  return out;
}

}  // namespace kvl
