#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace cyclemt {

using Tokens = std::vector<std::string>;

/// Word-level Levenshtein distance with unit costs.
std::size_t edit_distance(std::span<const std::string> a, std::span<const std::string> b);

struct SystemOutput {
  std::string model_id;
  Tokens tokens;
};

struct ConfusionSlot {
  /// word -> vote weight; the empty string is epsilon.
  std::map<std::string, double> votes;
};

struct ConfusionNetwork {
  std::string backbone_id;
  std::size_t systems = 0;
  std::vector<ConfusionSlot> slots;
};

/// Index of the output with the least summed edit distance to all others;
/// ties go to the smallest model_id.
std::size_t choose_backbone(std::span<const SystemOutput> outputs);

/// Aligns every output to the backbone. Substitutions and matches share the
/// backbone slot, deletions vote epsilon there, insertions open epsilon-padded
/// slots in the gap they fall into. Each system carries weight 1.
ConfusionNetwork build_confusion_network(std::span<const SystemOutput> outputs);

/// Highest vote per slot; ties go to the lexicographically smallest word and
/// epsilon loses every tie. Epsilon choices are dropped.
Tokens consensus_decode(const ConfusionNetwork& cn);

/// Edit distance divided by the longer length (0 when both are empty).
double normalized_edit_distance(std::span<const std::string> a, std::span<const std::string> b);

/// Candidate index minimizing the normalized edit distance to `e_con`; ties
/// go to the earliest candidate.
std::size_t conmbr_select(std::span<const SystemOutput> candidates, std::span<const std::string> e_con);

struct CombinedSentence {
  ConfusionNetwork network;
  Tokens consensus;
  std::size_t selected = 0;  // index into the outputs
  Tokens tokens;             // the selected candidate
};

/// Outputs are first ordered by model_id.
CombinedSentence combine_sentence(std::vector<SystemOutput> outputs);

/// model_id -> per-sentence 1-best outputs.
struct SystemPool {
  std::map<std::string, std::vector<Tokens>> systems;
  std::size_t sentences() const;
  void validate() const;
};

/// Per-sentence combination of the listed systems.
std::vector<CombinedSentence> combine_pool(const SystemPool& pool, std::span<const std::string> ids);

using CorpusMetric = std::function<double(const std::vector<Tokens>& hyps)>;

struct GmseStep {
  std::vector<std::string> selection;
  double score = 0.0;
};

struct GmseResult {
  std::vector<std::string> selection;  // model_id order
  double score = 0.0;
  std::vector<GmseStep> trace;         // accepted steps, starting with the best single system
};

/// Greedy forward selection: start from the best single system and keep
/// adding the system with the largest strict metric gain of the combined
/// output. Ties go to the smallest model_id.
GmseResult gmse(const SystemPool& pool, const CorpusMetric& metric);

}  // namespace cyclemt
