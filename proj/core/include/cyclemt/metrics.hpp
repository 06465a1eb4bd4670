#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace cyclemt {

/// Sufficient statistics for BLEU with n = 1..4. Additive over sentences.
struct BleuStats {
  std::array<std::size_t, 4> matches{};
  std::array<std::size_t, 4> totals{};
  std::size_t hyp_len = 0;
  std::size_t ref_len = 0;

  BleuStats& operator+=(const BleuStats& other);
  friend BleuStats operator+(BleuStats a, const BleuStats& b) { return a += b; }
  bool operator==(const BleuStats&) const = default;
};

struct BleuResult {
  double bleu = 0.0;  // 0..100
  std::array<double, 4> precisions{};
  double bp = 0.0;
  std::size_t hyp_len = 0;
  std::size_t ref_len = 0;
};

/// Clipped n-gram statistics of one tokenized hypothesis against one reference.
BleuStats bleu_stats(std::span<const std::string> hyp, std::span<const std::string> ref);

/// Unsmoothed BLEU; any order without matches gives 0.
BleuResult bleu_from_stats(const BleuStats& stats);

/// Detokenized text on both sides, tokenized internally with `tokenize`.
/// Case-sensitive.
BleuResult bleu_corpus(std::span<const std::string> hyps, std::span<const std::string> refs);
BleuResult bleu_corpus_tokens(std::span<const std::vector<std::string>> hyps,
                              std::span<const std::vector<std::string>> refs);

/// Add-one smoothed sentence BLEU (0..100); an empty reference gives 0.
double bleu_sentence(std::span<const std::string> hyp, std::span<const std::string> ref);
double bleu_sentence(const std::string& hyp, const std::string& ref);

}  // namespace cyclemt
