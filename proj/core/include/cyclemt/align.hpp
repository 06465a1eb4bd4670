#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "cyclemt/corpus.hpp"

namespace cyclemt {

/// Token <-> id mapping. Ids are dense and assigned in insertion order.
class Vocab {
 public:
  using Id = std::uint32_t;

  Id add(std::string_view word);
  std::optional<Id> find(std::string_view word) const;
  const std::string& word(Id id) const { return words_[id]; }
  std::size_t size() const { return words_.size(); }

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, Id> ids_;
};

/// Translation probabilities t(e|f) where f is the conditioning (source)
/// token and e the generated (target) token. Source id 0 is NULL.
class LexiconTable {
 public:
  static constexpr std::string_view kNull = "NULL";

  LexiconTable();

  /// t(e|f); 0 when the entry is absent.
  double prob(std::string_view e, std::string_view f) const;
  bool knows_source(std::string_view f) const;

  /// Up to `k` most probable e for f, ties by token order.
  std::vector<std::pair<std::string, double>> candidates(std::string_view f, std::size_t k) const;

  /// Sum of t(e|f) over stored e for each source word, keyed by f.
  std::unordered_map<std::string, double> source_mass() const;

  void set(std::string_view e, std::string_view f, double p);
  std::size_t size() const { return table_.size(); }

  /// Lines of "e f prob".
  void save(const std::filesystem::path& path) const;
  static LexiconTable load(const std::filesystem::path& path);

  const Vocab& source_vocab() const { return src_; }
  const Vocab& target_vocab() const { return tgt_; }
  std::optional<double> find(Vocab::Id e, Vocab::Id f) const;

 private:
  static std::uint64_t key(Vocab::Id e, Vocab::Id f) {
    return (static_cast<std::uint64_t>(f) << 32) | e;
  }
  void index() const;

  Vocab src_;
  Vocab tgt_;
  std::unordered_map<std::uint64_t, double> table_;
  /// Candidate rows per source id, built on first use. Building is guarded
  /// so concurrent const calls are safe; copies start unbuilt.
  struct SourceIndex {
    std::mutex mu;
    std::atomic<bool> ready{false};
    std::vector<std::vector<std::pair<Vocab::Id, double>>> rows;
    SourceIndex() = default;
    SourceIndex(const SourceIndex&) {}
    SourceIndex& operator=(const SourceIndex&) {
      ready = false;
      rows.clear();
      return *this;
    }
  };
  mutable SourceIndex by_source_;
};

/// Alignment probabilities q(j | i, m, l): target position i (1-based) of a
/// length-l target aligns to source position j of a length-m source, with
/// j = 0 standing for NULL. Unseen (i, m, l) fall back to uniform.
class DistortionTable {
 public:
  double prob(std::size_t j, std::size_t i, std::size_t m, std::size_t l) const;
  std::span<const double> row(std::size_t i, std::size_t m, std::size_t l) const;
  void set_row(std::size_t i, std::size_t m, std::size_t l, std::vector<double> q);
  std::size_t size() const { return rows_.size(); }

  /// Lines of "i j m l prob".
  void save(const std::filesystem::path& path) const;
  static DistortionTable load(const std::filesystem::path& path);

 private:
  static std::uint64_t key(std::size_t i, std::size_t m, std::size_t l);
  std::unordered_map<std::uint64_t, std::vector<double>> rows_;
};

struct Ibm1Result {
  LexiconTable lexicon;
  /// Corpus log-likelihood before each iteration plus one final value.
  std::vector<double> log_likelihood;
};

struct Ibm2Result {
  LexiconTable lexicon;
  DistortionTable distortion;
  std::vector<double> log_likelihood;
};

/// IBM Model 1 EM from a uniform table, t(tgt | src).
Ibm1Result ibm1_train(std::span<const SentencePair> pairs, std::size_t iters);

/// IBM Model 2 EM seeded with `init`; distortion starts uniform.
Ibm2Result ibm2_train(std::span<const SentencePair> pairs, std::size_t iters,
                      const LexiconTable& init);

struct Alignment {
  /// Per target token: aligned source index, or nullopt for NULL.
  std::vector<std::optional<std::size_t>> links;
  /// Mean per-target-token Viterbi log-probability.
  double score = 0.0;
};

inline constexpr double kOovFloor = 1e-9;

/// Viterbi alignment under t * q with absent t entries floored at 1e-9.
Alignment align_viterbi(const LexiconTable& lex, const DistortionTable& dist,
                        std::span<const std::string> src, std::span<const std::string> tgt);

double align_score(const LexiconTable& lex, const DistortionTable& dist, const SentencePair& pair);

/// Swaps source and target sides.
std::vector<SentencePair> swap_sides(std::span<const SentencePair> pairs);

}  // namespace cyclemt
