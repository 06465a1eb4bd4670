#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "cyclemt/corpus.hpp"

namespace cyclemt {

struct LmOptions {
  int order = 3;
  double k = 0.1;
  /// One weight per order (index 0 = unigram). Empty selects weights
  /// proportional to order index + 1.
  std::vector<double> lambdas;
};

std::vector<double> default_lambdas(int order);

/// Interpolated add-k n-gram model over natural-log probabilities.
///
/// Each order j contributes p_j(w|h) = (c(h_j w) + k) / (c(h_j .) + k V), where
/// h_j is the last j-1 history words and V counts every predictable symbol
/// (training words, </s> and <unk>). The mixture sum_j lambda_j p_j is
/// normalized for any history.
class NgramLm {
 public:
  using WordId = std::uint32_t;
  static constexpr WordId kUnk = 0;
  static constexpr WordId kBos = 1;
  static constexpr WordId kEos = 2;

  /// History kept by incremental scorers: the last order-1 ids.
  using State = std::u32string;

  static NgramLm train(std::span<const Sentence> corpus, const LmOptions& options = {});
  static NgramLm train(std::span<const std::vector<std::string>> corpus,
                       const LmOptions& options = {});

  int order() const { return order_; }
  double k() const { return k_; }
  const std::vector<double>& lambdas() const { return lambdas_; }
  /// Number of predictable symbols.
  std::size_t vocab_size() const { return words_.size() - 1; }
  const std::vector<std::string>& words() const { return words_; }

  WordId id(std::string_view word) const;

  State initial_state() const;
  /// log p(w | state); advances `state`.
  double score(State& state, WordId w) const;
  double prob(std::u32string_view history, WordId w) const;

  double logprob(std::span<const std::string> tokens) const;
  double logprob(const Sentence& s) const { return logprob(s.tokens); }
  /// logprob divided by the number of predicted symbols (tokens + </s>).
  double per_token_logprob(std::span<const std::string> tokens) const;

  double perplexity(std::span<const Sentence> corpus) const;

  void save(const std::filesystem::path& path) const;
  static NgramLm load(const std::filesystem::path& path);

 private:
  using Key = std::u32string;

  void index_contexts();

  int order_ = 3;
  double k_ = 0.1;
  std::vector<double> lambdas_;
  std::vector<std::string> words_;  // id -> word, ids 0..2 reserved
  std::unordered_map<std::string, WordId> ids_;
  std::vector<std::unordered_map<Key, std::uint64_t>> ngrams_;    // per order j-1
  std::vector<std::unordered_map<Key, std::uint64_t>> contexts_;  // per order j-1
};

}  // namespace cyclemt
