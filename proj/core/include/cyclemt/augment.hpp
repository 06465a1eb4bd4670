#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "cyclemt/corpus.hpp"
#include "cyclemt/toymt.hpp"

namespace cyclemt {

/// Platform-independent RNG: mt19937_64 with our own bounded draws, since
/// the standard distributions are implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  std::uint64_t next() { return engine_(); }
  /// Uniform in [0, bound), bound > 0.
  std::uint64_t below(std::uint64_t bound);
  template <class T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::swap(items[i - 1], items[below(i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

/// splitmix64 finalizer, used to derive independent seed streams.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

struct BackTranslation {
  std::vector<SentencePair> pairs;
  /// Index into the monolingual input for each pair.
  std::vector<std::size_t> source_index;
  std::size_t skipped = 0;
};

/// Pairs each target sentence with the 1-best output of `t2s`. Sentences
/// whose decode fails or comes back empty are skipped.
BackTranslation back_translate(const Translator& t2s, std::span<const Sentence> mono_tgt);

struct CycleConfig {
  double ratio = 0.5;
};

struct CycleResult {
  std::vector<Sentence> sentences;
  std::vector<bool> cycled;
  std::size_t skipped = 0;
};

/// Replaces the floor(ratio * N) lowest-scoring sentences (ties: earlier
/// line first) by S2T(T2S(x)); everything else passes through in order.
CycleResult cycle_translate(const Translator& t2s, const Translator& s2t,
                            std::span<const Sentence> mono_tgt, std::span<const double> lm_scores,
                            const CycleConfig& cfg);

/// Indices of the sentences cycle_translate would rewrite.
std::vector<std::size_t> cycle_selection(std::span<const double> lm_scores, double ratio);

enum class MixtureMode { small, big };

struct MixturePlan {
  MixtureMode mode = MixtureMode::small;
  std::size_t num_small_samples = 8;
  std::size_t parallel_repeat = 13;
  std::uint64_t seed = 1;
};

/// Size of each small mixture; throws when synthetic < parallel.
std::size_t small_corpus_size(std::size_t parallel, std::size_t synthetic);
std::size_t big_corpus_size(std::size_t parallel, std::size_t synthetic, std::size_t repeat);

/// Each corpus is the parallel data plus |parallel| synthetic pairs drawn
/// without replacement, shuffled. Sample k uses seed stream k.
std::vector<std::vector<SentencePair>> construct_small(std::span<const SentencePair> parallel,
                                                       std::span<const SentencePair> synthetic,
                                                       const MixturePlan& plan);

/// parallel repeated `parallel_repeat` times plus all synthetic, shuffled.
std::vector<SentencePair> construct_big(std::span<const SentencePair> parallel,
                                        std::span<const SentencePair> synthetic,
                                        const MixturePlan& plan);

}  // namespace cyclemt
