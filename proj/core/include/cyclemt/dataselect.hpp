#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cyclemt/align.hpp"
#include "cyclemt/config.hpp"
#include "cyclemt/corpus.hpp"
#include "cyclemt/ngram_lm.hpp"
#include "cyclemt/toymt.hpp"

namespace cyclemt {

/// Character classes that can be declared illegal in addition to control
/// characters and U+FFFD, which are always rejected.
enum class CharClass { private_use, zero_width, invalid_utf8 };

enum class DropReason { duplicate, illegal_char, length, ratio, lm, align, t2s };

std::string_view to_string(DropReason reason);

struct SelectionConfig {
  std::size_t min_len = 3;
  std::size_t max_len = 80;
  double optimal_ratio = 0.76;
  double ratio_max_deviation = 0.5;
  std::set<CharClass> illegal_char_classes{CharClass::private_use, CharClass::zero_width,
                                           CharClass::invalid_utf8};
  /// Fraction of the lowest-scoring survivors dropped at each scored stage.
  double lm_percentile_cut = 0.0;
  double align_percentile_cut = 0.0;
  double t2s_percentile_cut = 0.0;
  bool dedup = true;

  /// Throws on violated invariants.
  void validate() const;
  /// Keys: min_len, max_len, optimal_ratio, ratio_max_deviation,
  /// illegal_char_classes (comma list or "none"), lm_percentile_cut,
  /// align_percentile_cut, t2s_percentile_cut, dedup.
  static SelectionConfig from_config(const Config& cfg);
};

/// Summary of one score distribution.
struct ScoreSummary {
  std::size_t count = 0;
  double min = 0, p10 = 0, p25 = 0, p50 = 0, p75 = 0, p90 = 0, max = 0;
};

ScoreSummary summarize(std::vector<double> values);

struct SelectionReport {
  std::size_t input = 0;
  std::size_t retained = 0;
  /// One entry per DropReason, zero counts included.
  std::map<std::string, std::size_t> dropped;
  std::map<std::string, ScoreSummary> distributions;

  std::size_t total_dropped() const;
  std::string to_json() const;
};

bool has_illegal_char(std::string_view text, const std::set<CharClass>& classes);

/// First failing rule among illegal characters and length.
std::optional<DropReason> rule_filter(const Sentence& s, const SelectionConfig& cfg);
std::optional<DropReason> rule_filter(const SentencePair& p, const SelectionConfig& cfg);

/// |len(src)/len(tgt) - optimal_ratio|.
double ratio_score(const SentencePair& p, const SelectionConfig& cfg);
double ratio_score(std::size_t src_len, std::size_t tgt_len, double optimal_ratio);

/// Forced per-token T2S score: the source side scored as a translation of
/// the target side.
double t2s_score(const TranslatorSpec& t2s, const SentencePair& p);

struct ParallelScorers {
  const NgramLm* lm = nullptr;  // target-side LM
  const LexiconTable* lex = nullptr;
  const DistortionTable* dist = nullptr;
  const TranslatorSpec* t2s = nullptr;
};

struct ParallelSelection {
  std::vector<SentencePair> retained;
  SelectionReport report;
};

/// dedup -> rule filter -> ratio -> LM cut -> alignment cut -> T2S cut.
/// Retained pairs carry a score for every scorer supplied.
ParallelSelection select_parallel(std::span<const SentencePair> pairs, const SelectionConfig& cfg,
                                  const ParallelScorers& scorers);

struct MonoSelection {
  std::vector<Sentence> retained;
  /// Per-token LM log-probability of each retained sentence (empty when no
  /// LM was supplied).
  std::vector<double> lm_scores;
  SelectionReport report;
};

/// dedup -> rule filter -> LM cut.
MonoSelection select_mono(std::span<const Sentence> sentences, const SelectionConfig& cfg,
                          const NgramLm* lm);

/// Indices (ascending) that survive dropping floor(fraction * N) lowest
/// scores. Among equal scores later items are dropped first.
std::vector<std::size_t> percentile_keep(std::span<const double> scores, double fraction);

}  // namespace cyclemt
