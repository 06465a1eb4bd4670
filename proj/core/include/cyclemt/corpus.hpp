#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace cyclemt {

/// A tokenized sentence.
///
/// `glue[i]` records that token i was written flush against token i-1 in
/// `raw`. It is filled by `tokenize` and lets `detokenize` reproduce the
/// original spacing exactly; sentences built from bare token lists leave it
/// empty and fall back to rule-based detokenization.
struct Sentence {
  std::vector<std::string> tokens;
  std::string raw;
  std::string lang;
  std::vector<bool> glue;

  bool empty() const { return tokens.empty(); }
  std::size_t size() const { return tokens.size(); }
  bool operator==(const Sentence&) const = default;
};

enum class Origin { parallel, synthetic_back, synthetic_cycle };

std::string_view to_string(Origin origin);
Origin origin_from_string(std::string_view name);

struct SentencePair {
  Sentence src;
  Sentence tgt;
  Origin origin = Origin::parallel;
  std::map<std::string, double> scores;
};

/// Builds a sentence from already tokenized words (raw = space-joined).
Sentence make_sentence(std::vector<std::string> tokens, std::string lang = {});

/// Splits a space-separated line of tokens without applying any rules.
Sentence from_tokenized(std::string_view line, std::string lang = {});

std::string join(std::span<const std::string> tokens, std::string_view sep = " ");

/// Whitespace split, then leading and trailing punctuation characters are
/// detached one per token. Word-internal punctuation ("2006-07", "it's") is
/// left in place.
Sentence tokenize(std::string_view text, std::string_view lang = {});

/// Rejoins tokens. Uses glue flags when present, otherwise attaches closing
/// punctuation to the left and opening brackets to the right.
std::string detokenize(const Sentence& sentence);
std::string detokenize(std::span<const std::string> tokens);

/// Collapses whitespace runs to a single space and trims both ends.
std::string normalize_whitespace(std::string_view text);

class TruecaseModel {
 public:
  /// lower-cased form -> surface casing -> count (sentence-internal only)
  using CasingCounts = std::unordered_map<std::string, std::map<std::string, std::size_t>>;

  TruecaseModel() = default;
  explicit TruecaseModel(CasingCounts counts) : counts_(std::move(counts)) {}

  /// Most frequent casing for the token; equal counts prefer the lower-case
  /// form. Returns an empty string when the token was never observed.
  std::string best_casing(std::string_view token) const;

  const CasingCounts& counts() const { return counts_; }
  bool empty() const { return counts_.empty(); }

  void save(const std::filesystem::path& path) const;
  static TruecaseModel load(const std::filesystem::path& path);

 private:
  CasingCounts counts_;
};

TruecaseModel train_truecaser(std::span<const Sentence> corpus);

/// Lower-cases the sentence-initial token iff its dominant internal casing
/// is lower case.
Sentence apply_truecase(const TruecaseModel& model, const Sentence& sentence);

/// Restores sentence-initial capitalization. Tokens whose dominant casing
/// is mixed with a lower-case first letter ("iPhone") are left alone.
Sentence detruecase(const TruecaseModel& model, const Sentence& sentence);

/// Keeps the first occurrence of each exact (src.raw, tgt.raw) pair.
std::vector<SentencePair> dedup(std::span<const SentencePair> pairs);

// --- corpus files -------------------------------------------------------

std::vector<std::string> read_lines(const std::filesystem::path& path);
void write_lines(const std::filesystem::path& path, std::span<const std::string> lines);

/// Reads space-tokenized lines.
std::vector<Sentence> read_tokenized(const std::filesystem::path& path, std::string_view lang = {});
void write_tokenized(const std::filesystem::path& path, std::span<const Sentence> sentences);

/// Two aligned files, one sentence per line. Sides are tokenized.
std::vector<SentencePair> read_parallel(const std::filesystem::path& src,
                                        const std::filesystem::path& tgt,
                                        std::string_view src_lang, std::string_view tgt_lang);
/// src<TAB>tgt per line. Sides are tokenized.
std::vector<SentencePair> read_parallel_tsv(const std::filesystem::path& path,
                                            std::string_view src_lang,
                                            std::string_view tgt_lang);

/// JSON-lines {src, tgt, origin, scores}; src/tgt hold space-joined tokens.
void write_scored_pairs(const std::filesystem::path& path, std::span<const SentencePair> pairs);
std::vector<SentencePair> read_scored_pairs(const std::filesystem::path& path);

}  // namespace cyclemt
