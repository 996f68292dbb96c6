// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "kvl/instance.hpp"
#include "kvl/kb.hpp"

namespace kvl {

/// Deterministic generator for the knowledge-dependence task. Each instance
/// pairs a query holding a cue word with four candidates holding marker
/// words; exactly one marker is connected to a query cue by a stored fact,
/// and that candidate is gold. Cue/marker pairs are split disjointly between
/// the train and eval sets, so any model without access to the knowledge
/// base scores at chance on eval. Unrelated pair words appear as balanced
/// decoys and low-weight noise facts hang off cues and markers, which makes
/// injected-but-irrelevant knowledge a real distraction.
struct SynthConfig {
  std::uint64_t seed = 0;
  int train_instances = 4000;  // per subtask; ids pair the qa/qar records
  int eval_instances = 1000;
  int pairs = 48;
  int eval_pairs = 12;  // held out of training gold/distractor roles
  int d_app = 16;
  double image_width = 640.0;
  double image_height = 480.0;
  double decoy_prob = 0.25;      // unrelated pair word dropped into a candidate
  double extra_fact_prob = 0.5;  // low-weight noise fact per cue/marker

  void validate() const;
};

struct SynthOutput {
  std::vector<Instance> train;
  std::vector<Instance> eval;
  std::vector<Fact> facts;
  KnowledgeBase kb;
  std::vector<std::string> vocab_surfaces;  // sorted; includes specials
};

SynthOutput make_synthetic(const SynthConfig& config);

/// True when some candidate token is one stored fact away from some query
/// token. The generator asserts exactly one linked candidate per instance
/// (the gold one); tests re-check it.
bool candidate_kb_linked(const KnowledgeBase& kb,
                         const std::vector<std::string>& query_tokens,
                         const std::vector<std::string>& candidate_tokens);

}  // namespace kvl
