#include "cyclemt/dataselect.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_set>

#include "json.hpp"

#include "cyclemt/error.hpp"
#include "cyclemt/parallel.hpp"
#include "utf8.hpp"

namespace cyclemt {

namespace {

constexpr DropReason kAllReasons[] = {DropReason::duplicate, DropReason::illegal_char,
                                      DropReason::length,    DropReason::ratio,
                                      DropReason::lm,        DropReason::align,
                                      DropReason::t2s};

SelectionReport empty_report(std::size_t input) {
  SelectionReport r;
  r.input = input;
  for (const auto reason : kAllReasons) r.dropped[std::string(to_string(reason))] = 0;
  return r;
}

bool is_control(char32_t cp) { return cp < 0x20 || (cp >= 0x7F && cp <= 0x9F); }

bool is_private_use(char32_t cp) {
  return (cp >= 0xE000 && cp <= 0xF8FF) || (cp >= 0xF0000 && cp <= 0xFFFFD) ||
         (cp >= 0x100000 && cp <= 0x10FFFD);
}

bool is_zero_width(char32_t cp) {
  return (cp >= 0x200B && cp <= 0x200D) || cp == 0x2060 || cp == 0xFEFF;
}

double quantile(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) return 0.0;
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(sorted.size() - 1, lo + 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + (sorted[hi] - sorted[lo]) * frac;
}

std::string pair_key(const SentencePair& p) { return p.src.raw + '\x1f' + p.tgt.raw; }

std::string sentence_key(const Sentence& s) { return s.raw.empty() ? join(s.tokens) : s.raw; }

/// Applies one scored stage over `alive` and removes the dropped indices.
template <class Score>
void scored_stage(std::vector<std::size_t>& alive, double cut, DropReason reason,
                  const std::string& name, SelectionReport& report, Score&& score,
                  std::vector<double>& values_out) {
  std::vector<double> values(alive.size());
  parallel_for(alive.size(), [&](std::size_t i) { values[i] = score(alive[i]); });
  report.distributions[name] = summarize(values);
  const auto keep = percentile_keep(values, cut);
  report.dropped[std::string(to_string(reason))] += alive.size() - keep.size();
  std::vector<std::size_t> next;
  std::vector<double> kept_values;
  next.reserve(keep.size());
  for (const auto k : keep) {
    next.push_back(alive[k]);
    kept_values.push_back(values[k]);
  }
  alive = std::move(next);
  values_out = std::move(kept_values);
}

}  // namespace

std::string_view to_string(DropReason reason) {
  switch (reason) {
    case DropReason::duplicate:
      return "duplicate";
    case DropReason::illegal_char:
      return "illegal_char";
    case DropReason::length:
      return "length";
    case DropReason::ratio:
      return "ratio";
    case DropReason::lm:
      return "lm";
    case DropReason::align:
      return "align";
    case DropReason::t2s:
      return "t2s";
  }
  return "unknown";
}

void SelectionConfig::validate() const {
  if (min_len == 0 || min_len > max_len) throw Error("selection config: need 0 < min_len <= max_len");
  if (!(optimal_ratio > 0.0)) throw Error("selection config: optimal_ratio must be > 0");
  if (!(ratio_max_deviation >= 0.0)) throw Error("selection config: ratio_max_deviation must be >= 0");
  for (const double p : {lm_percentile_cut, align_percentile_cut, t2s_percentile_cut}) {
    if (!(p >= 0.0 && p <= 1.0)) throw Error("selection config: percentile cuts must lie in [0,1]");
  }
}

SelectionConfig SelectionConfig::from_config(const Config& cfg) {
  SelectionConfig c;
  c.min_len = cfg.get_size("min_len", c.min_len);
  c.max_len = cfg.get_size("max_len", c.max_len);
  c.optimal_ratio = cfg.get_double("optimal_ratio", c.optimal_ratio);
  c.ratio_max_deviation = cfg.get_double("ratio_max_deviation", c.ratio_max_deviation);
  c.lm_percentile_cut = cfg.get_double("lm_percentile_cut", c.lm_percentile_cut);
  c.align_percentile_cut = cfg.get_double("align_percentile_cut", c.align_percentile_cut);
  c.t2s_percentile_cut = cfg.get_double("t2s_percentile_cut", c.t2s_percentile_cut);
  c.dedup = cfg.get_bool("dedup", c.dedup);
  if (cfg.has("illegal_char_classes")) {
    c.illegal_char_classes.clear();
    for (const auto& name : cfg.get_list("illegal_char_classes", {})) {
      if (name == "none") continue;
      if (name == "private_use") {
        c.illegal_char_classes.insert(CharClass::private_use);
      } else if (name == "zero_width") {
        c.illegal_char_classes.insert(CharClass::zero_width);
      } else if (name == "invalid_utf8") {
        c.illegal_char_classes.insert(CharClass::invalid_utf8);
      } else {
        throw FormatError("unknown character class '" + name + "'");
      }
    }
  }
  c.validate();
  return c;
}

ScoreSummary summarize(std::vector<double> values) {
  ScoreSummary s;
  s.count = values.size();
  if (values.empty()) return s;
  std::sort(values.begin(), values.end());
  s.min = values.front();
  s.max = values.back();
  s.p10 = quantile(values, 0.10);
  s.p25 = quantile(values, 0.25);
  s.p50 = quantile(values, 0.50);
  s.p75 = quantile(values, 0.75);
  s.p90 = quantile(values, 0.90);
  return s;
}

std::size_t SelectionReport::total_dropped() const {
  std::size_t n = 0;
  for (const auto& [_, c] : dropped) n += c;
  return n;
}

std::string SelectionReport::to_json() const {
  nlohmann::ordered_json j;
  j["input"] = input;
  j["retained"] = retained;
  j["dropped"] = nlohmann::ordered_json::object();
  for (const auto reason : kAllReasons) {
    const std::string name(to_string(reason));
    const auto it = dropped.find(name);
    j["dropped"][name] = it == dropped.end() ? 0 : it->second;
  }
  j["distributions"] = nlohmann::ordered_json::object();
  for (const auto& [name, s] : distributions) {
    j["distributions"][name] = {{"count", s.count}, {"min", s.min}, {"p10", s.p10},
                                {"p25", s.p25},     {"p50", s.p50}, {"p75", s.p75},
                                {"p90", s.p90},     {"max", s.max}};
  }
  return j.dump(2);
}

bool has_illegal_char(std::string_view text, const std::set<CharClass>& classes) {
  for (const auto& cp : utf8::decode(text)) {
    if (!cp.valid) {
      if (classes.count(CharClass::invalid_utf8)) return true;
      continue;
    }
    if (is_control(cp.value) || cp.value == 0xFFFD) return true;
    if (classes.count(CharClass::private_use) && is_private_use(cp.value)) return true;
    if (classes.count(CharClass::zero_width) && is_zero_width(cp.value)) return true;
  }
  return false;
}

std::optional<DropReason> rule_filter(const Sentence& s, const SelectionConfig& cfg) {
  for (const auto& tok : s.tokens) {
    if (has_illegal_char(tok, cfg.illegal_char_classes)) return DropReason::illegal_char;
  }
  if (s.tokens.size() < cfg.min_len || s.tokens.size() > cfg.max_len) return DropReason::length;
  return std::nullopt;
}

std::optional<DropReason> rule_filter(const SentencePair& p, const SelectionConfig& cfg) {
  for (const auto* s : {&p.src, &p.tgt}) {
    for (const auto& tok : s->tokens) {
      if (has_illegal_char(tok, cfg.illegal_char_classes)) return DropReason::illegal_char;
    }
  }
  for (const auto* s : {&p.src, &p.tgt}) {
    if (s->tokens.size() < cfg.min_len || s->tokens.size() > cfg.max_len) return DropReason::length;
  }
  return std::nullopt;
}

double ratio_score(std::size_t src_len, std::size_t tgt_len, double optimal_ratio) {
  if (tgt_len == 0) throw Error("ratio of an empty target side");
  return std::abs(static_cast<double>(src_len) / static_cast<double>(tgt_len) - optimal_ratio);
}

double ratio_score(const SentencePair& p, const SelectionConfig& cfg) {
  return ratio_score(p.src.tokens.size(), p.tgt.tokens.size(), cfg.optimal_ratio);
}

double t2s_score(const TranslatorSpec& t2s, const SentencePair& p) {
  const auto h = score_hypothesis(t2s, p.tgt.tokens, p.src.tokens);
  return h.logscore / static_cast<double>(std::max<std::size_t>(1, p.src.tokens.size()));
}

std::vector<std::size_t> percentile_keep(std::span<const double> scores, double fraction) {
  const std::size_t n = scores.size();
  const auto drop = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n) + 1e-9));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] < scores[b];
    return a > b;
  });
  std::vector<bool> dropped(n, false);
  for (std::size_t i = 0; i < std::min(drop, n); ++i) dropped[order[i]] = true;
  std::vector<std::size_t> keep;
  keep.reserve(n - std::min(drop, n));
  for (std::size_t i = 0; i < n; ++i) {
    if (!dropped[i]) keep.push_back(i);
  }
  return keep;
}

ParallelSelection select_parallel(std::span<const SentencePair> pairs, const SelectionConfig& cfg,
                                  const ParallelScorers& scorers) {
  cfg.validate();
  if (cfg.lm_percentile_cut > 0 && !scorers.lm) throw Error("LM cut requested without an LM");
  if (cfg.align_percentile_cut > 0 && (!scorers.lex || !scorers.dist)) {
    throw Error("alignment cut requested without alignment models");
  }
  if (cfg.t2s_percentile_cut > 0 && !scorers.t2s) throw Error("T2S cut requested without a T2S model");

  ParallelSelection out;
  out.report = empty_report(pairs.size());
  auto& report = out.report;
  std::vector<SentencePair> work(pairs.begin(), pairs.end());
  std::vector<std::size_t> alive;
  std::unordered_set<std::string> seen;
  std::vector<double> ratio_values;
  for (std::size_t i = 0; i < work.size(); ++i) {
    if (cfg.dedup && !seen.insert(pair_key(work[i])).second) {
      ++report.dropped["duplicate"];
      continue;
    }
    if (const auto reason = rule_filter(work[i], cfg)) {
      ++report.dropped[std::string(to_string(*reason))];
      continue;
    }
    const double r = ratio_score(work[i], cfg);
    ratio_values.push_back(r);
    work[i].scores["ratio"] = r;
    if (r > cfg.ratio_max_deviation) {
      ++report.dropped["ratio"];
      continue;
    }
    alive.push_back(i);
  }
  report.distributions["ratio"] = summarize(ratio_values);

  std::vector<double> kept;
  if (scorers.lm) {
    scored_stage(alive, cfg.lm_percentile_cut, DropReason::lm, "lm", report,
                 [&](std::size_t i) { return scorers.lm->per_token_logprob(work[i].tgt.tokens); }, kept);
    for (std::size_t k = 0; k < alive.size(); ++k) work[alive[k]].scores["lm"] = kept[k];
  }
  if (scorers.lex && scorers.dist) {
    scored_stage(alive, cfg.align_percentile_cut, DropReason::align, "align", report,
                 [&](std::size_t i) { return align_score(*scorers.lex, *scorers.dist, work[i]); }, kept);
    for (std::size_t k = 0; k < alive.size(); ++k) work[alive[k]].scores["align"] = kept[k];
  }
  if (scorers.t2s) {
    scored_stage(alive, cfg.t2s_percentile_cut, DropReason::t2s, "t2s", report,
                 [&](std::size_t i) { return t2s_score(*scorers.t2s, work[i]); }, kept);
    for (std::size_t k = 0; k < alive.size(); ++k) work[alive[k]].scores["t2s"] = kept[k];
  }

  out.retained.reserve(alive.size());
  for (const auto i : alive) out.retained.push_back(std::move(work[i]));
  report.retained = out.retained.size();
  return out;
}

MonoSelection select_mono(std::span<const Sentence> sentences, const SelectionConfig& cfg,
                          const NgramLm* lm) {
  cfg.validate();
  if (cfg.lm_percentile_cut > 0 && !lm) throw Error("LM cut requested without an LM");
  MonoSelection out;
  out.report = empty_report(sentences.size());
  auto& report = out.report;
  std::vector<std::size_t> alive;
  std::unordered_set<std::string> seen;
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    if (cfg.dedup && !seen.insert(sentence_key(sentences[i])).second) {
      ++report.dropped["duplicate"];
      continue;
    }
    if (const auto reason = rule_filter(sentences[i], cfg)) {
      ++report.dropped[std::string(to_string(*reason))];
      continue;
    }
    alive.push_back(i);
  }
  if (lm) {
    scored_stage(alive, cfg.lm_percentile_cut, DropReason::lm, "lm", report,
                 [&](std::size_t i) { return lm->per_token_logprob(sentences[i].tokens); },
                 out.lm_scores);
  }
  out.retained.reserve(alive.size());
  for (const auto i : alive) out.retained.push_back(sentences[i]);
  report.retained = out.retained.size();
  return out;
}

}  // namespace cyclemt
