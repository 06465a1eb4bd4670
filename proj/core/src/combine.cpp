#include "cyclemt/combine.hpp"

#include <algorithm>
#include <limits>

#include "cyclemt/error.hpp"
#include "cyclemt/parallel.hpp"

namespace cyclemt {

namespace {

using Table = std::vector<std::vector<std::size_t>>;

Table distance_table(std::span<const std::string> a, std::span<const std::string> b) {
  Table d(a.size() + 1, std::vector<std::size_t>(b.size() + 1));
  for (std::size_t i = 0; i <= a.size(); ++i) d[i][0] = i;
  for (std::size_t j = 0; j <= b.size(); ++j) d[0][j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t sub = d[i - 1][j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      d[i][j] = std::min({sub, d[i - 1][j] + 1, d[i][j - 1] + 1});
    }
  }
  return d;
}

/// Alignment of `hyp` against the backbone: one word or epsilon per
/// backbone position, and the words inserted into each of the n+1 gaps.
struct HypAlignment {
  std::vector<std::string> at;               // size n, "" = deleted
  std::vector<std::vector<std::string>> gaps;  // size n+1
};

HypAlignment align_to_backbone(std::span<const std::string> backbone, std::span<const std::string> hyp) {
  const auto d = distance_table(backbone, hyp);
  HypAlignment a;
  a.at.assign(backbone.size(), "");
  a.gaps.assign(backbone.size() + 1, {});
  std::size_t i = backbone.size();
  std::size_t j = hyp.size();
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0 && d[i][j] == d[i - 1][j - 1] + (backbone[i - 1] == hyp[j - 1] ? 0 : 1)) {
      a.at[i - 1] = hyp[j - 1];
      --i;
      --j;
    } else if (i > 0 && d[i][j] == d[i - 1][j] + 1) {
      --i;
    } else {
      a.gaps[i].push_back(hyp[j - 1]);
      --j;
    }
  }
  for (auto& g : a.gaps) std::reverse(g.begin(), g.end());
  return a;
}

}  // namespace

std::size_t edit_distance(std::span<const std::string> a, std::span<const std::string> b) {
  // Two-row variant of distance_table.
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = std::min({prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1), prev[j] + 1, cur[j - 1] + 1});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

std::size_t choose_backbone(std::span<const SystemOutput> outputs) {
  if (outputs.empty()) throw Error("no system outputs to combine");
  std::size_t best = 0;
  std::size_t best_total = std::numeric_limits<std::size_t>::max();
  for (std::size_t k = 0; k < outputs.size(); ++k) {
    std::size_t total = 0;
    for (std::size_t o = 0; o < outputs.size(); ++o) {
      if (o != k) total += edit_distance(outputs[k].tokens, outputs[o].tokens);
    }
    if (total < best_total || (total == best_total && outputs[k].model_id < outputs[best].model_id)) {
      best = k;
      best_total = total;
    }
  }
  return best;
}

ConfusionNetwork build_confusion_network(std::span<const SystemOutput> outputs) {
  const std::size_t b = choose_backbone(outputs);
  const auto& backbone = outputs[b].tokens;
  const std::size_t n = backbone.size();

  std::vector<HypAlignment> aligned;
  aligned.reserve(outputs.size());
  std::vector<std::size_t> gap_width(n + 1, 0);
  for (const auto& o : outputs) {
    aligned.push_back(align_to_backbone(backbone, o.tokens));
    for (std::size_t g = 0; g <= n; ++g) gap_width[g] = std::max(gap_width[g], aligned.back().gaps[g].size());
  }

  ConfusionNetwork cn;
  cn.backbone_id = outputs[b].model_id;
  cn.systems = outputs.size();
  for (std::size_t g = 0; g <= n; ++g) {
    for (std::size_t k = 0; k < gap_width[g]; ++k) {
      ConfusionSlot slot;
      for (const auto& a : aligned) slot.votes[k < a.gaps[g].size() ? a.gaps[g][k] : ""] += 1.0;
      cn.slots.push_back(std::move(slot));
    }
    if (g == n) break;
    ConfusionSlot slot;
    for (const auto& a : aligned) slot.votes[a.at[g]] += 1.0;
    cn.slots.push_back(std::move(slot));
  }
  return cn;
}

Tokens consensus_decode(const ConfusionNetwork& cn) {
  Tokens out;
  for (const auto& slot : cn.slots) {
    const std::string* best = nullptr;
    double best_w = -1.0;
    // votes are ordered with epsilon ("") first, so a strict comparison lets
    // any word beat epsilon on a tie while the first word wins among words.
    for (const auto& [word, w] : slot.votes) {
      if (w > best_w || (w == best_w && best && best->empty())) {
        best = &word;
        best_w = w;
      }
    }
    if (best && !best->empty()) out.push_back(*best);
  }
  return out;
}

double normalized_edit_distance(std::span<const std::string> a, std::span<const std::string> b) {
  const std::size_t longest = std::max(a.size(), b.size());
  if (longest == 0) return 0.0;
  return static_cast<double>(edit_distance(a, b)) / static_cast<double>(longest);
}

std::size_t conmbr_select(std::span<const SystemOutput> candidates, std::span<const std::string> e_con) {
  if (candidates.empty()) throw Error("empty candidate set");
  std::size_t best = 0;
  double best_loss = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    const double loss = normalized_edit_distance(candidates[k].tokens, e_con);
    if (loss < best_loss) {
      best = k;
      best_loss = loss;
    }
  }
  return best;
}

CombinedSentence combine_sentence(std::vector<SystemOutput> outputs) {
  std::stable_sort(outputs.begin(), outputs.end(),
                   [](const SystemOutput& a, const SystemOutput& b) { return a.model_id < b.model_id; });
  CombinedSentence c;
  c.network = build_confusion_network(outputs);
  c.consensus = consensus_decode(c.network);
  c.selected = conmbr_select(outputs, c.consensus);
  c.tokens = outputs[c.selected].tokens;
  return c;
}

std::size_t SystemPool::sentences() const {
  return systems.empty() ? 0 : systems.begin()->second.size();
}

void SystemPool::validate() const {
  if (systems.empty()) throw Error("empty system pool");
  const std::size_t n = sentences();
  for (const auto& [id, outs] : systems) {
    if (outs.size() != n) {
      throw Error("system '" + id + "' covers " + std::to_string(outs.size()) + " sentences, expected " +
                  std::to_string(n));
    }
  }
}

std::vector<CombinedSentence> combine_pool(const SystemPool& pool, std::span<const std::string> ids) {
  pool.validate();
  if (ids.empty()) throw Error("no systems selected for combination");
  for (const auto& id : ids) {
    if (!pool.systems.count(id)) throw Error("unknown system '" + id + "'");
  }
  std::vector<CombinedSentence> out(pool.sentences());
  parallel_for(out.size(), [&](std::size_t s) {
    std::vector<SystemOutput> outputs;
    outputs.reserve(ids.size());
    for (const auto& id : ids) outputs.push_back({id, pool.systems.at(id)[s]});
    out[s] = combine_sentence(std::move(outputs));
  });
  return out;
}

GmseResult gmse(const SystemPool& pool, const CorpusMetric& metric) {
  pool.validate();
  auto evaluate = [&](const std::vector<std::string>& ids) {
    std::vector<Tokens> hyps;
    for (auto& c : combine_pool(pool, ids)) hyps.push_back(std::move(c.tokens));
    return metric(hyps);
  };

  GmseResult result;
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& [id, outs] : pool.systems) {
    const double s = metric(outs);
    if (s > best) {
      best = s;
      result.selection = {id};
    }
  }
  result.score = best;
  result.trace.push_back({result.selection, best});

  while (result.selection.size() < pool.systems.size()) {
    std::vector<std::string> best_set;
    double best_score = result.score;
    for (const auto& [id, _] : pool.systems) {
      if (std::find(result.selection.begin(), result.selection.end(), id) != result.selection.end()) continue;
      auto candidate = result.selection;
      candidate.push_back(id);
      std::sort(candidate.begin(), candidate.end());
      const double s = evaluate(candidate);
      if (s > best_score) {
        best_score = s;
        best_set = std::move(candidate);
      }
    }
    if (best_set.empty()) break;
    result.selection = std::move(best_set);
    result.score = best_score;
    result.trace.push_back({result.selection, best_score});
  }
  return result;
}

}  // namespace cyclemt
