#include "cyclemt/augment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>

#include "cyclemt/error.hpp"
#include "cyclemt/parallel.hpp"

namespace cyclemt {

std::uint64_t Rng::below(std::uint64_t bound) {
  if (bound == 0) throw Error("Rng::below(0)");
  // Rejection sampling over the largest multiple of bound.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t x = engine_();
  while (x >= limit) x = engine_();
  return x % bound;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

BackTranslation back_translate(const Translator& t2s, std::span<const Sentence> mono_tgt) {
  std::vector<std::optional<Sentence>> outputs(mono_tgt.size());
  parallel_for(mono_tgt.size(), [&](std::size_t i) {
    try {
      const auto nbest = t2s.translate(mono_tgt[i], 1);
      if (!nbest.hyps.empty() && !nbest.hyps.front().tokens.empty()) {
        outputs[i] = make_sentence(nbest.hyps.front().tokens);
      }
    } catch (const Error&) {
    }
  });
  BackTranslation bt;
  for (std::size_t i = 0; i < mono_tgt.size(); ++i) {
    if (!outputs[i]) {
      ++bt.skipped;
      continue;
    }
    SentencePair p;
    p.src = std::move(*outputs[i]);
    p.tgt = mono_tgt[i];
    p.origin = Origin::synthetic_back;
    bt.pairs.push_back(std::move(p));
    bt.source_index.push_back(i);
  }
  return bt;
}

std::vector<std::size_t> cycle_selection(std::span<const double> lm_scores, double ratio) {
  if (!(ratio >= 0.0 && ratio <= 1.0)) throw Error("cycle ratio must lie in [0,1]");
  const std::size_t n = lm_scores.size();
  const auto k = std::min(n, static_cast<std::size_t>(std::floor(ratio * static_cast<double>(n) + 1e-9)));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return lm_scores[a] < lm_scores[b]; });
  order.resize(k);
  std::sort(order.begin(), order.end());
  return order;
}

CycleResult cycle_translate(const Translator& t2s, const Translator& s2t,
                            std::span<const Sentence> mono_tgt, std::span<const double> lm_scores,
                            const CycleConfig& cfg) {
  if (lm_scores.size() != mono_tgt.size()) throw Error("one LM score per sentence required");
  const auto chosen = cycle_selection(lm_scores, cfg.ratio);
  CycleResult out;
  out.sentences.assign(mono_tgt.begin(), mono_tgt.end());
  out.cycled.assign(mono_tgt.size(), false);
  std::vector<std::optional<Sentence>> rewritten(chosen.size());
  parallel_for(chosen.size(), [&](std::size_t c) {
    const Sentence& x = mono_tgt[chosen[c]];
    try {
      const auto back = t2s.translate(x, 1);
      if (back.hyps.empty() || back.hyps.front().tokens.empty()) return;
      const auto forth = s2t.translate(make_sentence(back.hyps.front().tokens), 1);
      if (forth.hyps.empty() || forth.hyps.front().tokens.empty()) return;
      Sentence y = make_sentence(forth.hyps.front().tokens, x.lang);
      rewritten[c] = std::move(y);
    } catch (const Error&) {
    }
  });
  for (std::size_t c = 0; c < chosen.size(); ++c) {
    if (!rewritten[c]) {
      ++out.skipped;
      continue;
    }
    out.sentences[chosen[c]] = std::move(*rewritten[c]);
    out.cycled[chosen[c]] = true;
  }
  return out;
}

std::size_t small_corpus_size(std::size_t parallel, std::size_t synthetic) {
  if (synthetic < parallel) {
    throw Error("small construction needs at least as many synthetic pairs (" +
                std::to_string(synthetic) + ") as parallel pairs (" + std::to_string(parallel) +
                "); use big mode");
  }
  return 2 * parallel;
}

std::size_t big_corpus_size(std::size_t parallel, std::size_t synthetic, std::size_t repeat) {
  return repeat * parallel + synthetic;
}

std::vector<std::vector<SentencePair>> construct_small(std::span<const SentencePair> parallel,
                                                       std::span<const SentencePair> synthetic,
                                                       const MixturePlan& plan) {
  small_corpus_size(parallel.size(), synthetic.size());
  if (plan.num_small_samples < 1) throw Error("num_small_samples must be >= 1");
  std::vector<std::vector<SentencePair>> corpora;
  for (std::size_t k = 0; k < plan.num_small_samples; ++k) {
    Rng rng(mix_seed(plan.seed, k));
    // Partial Fisher-Yates: the first |parallel| slots form the sample.
    std::vector<std::size_t> idx(synthetic.size());
    std::iota(idx.begin(), idx.end(), 0);
    for (std::size_t i = 0; i < parallel.size(); ++i) {
      std::swap(idx[i], idx[i + rng.below(idx.size() - i)]);
    }
    std::vector<SentencePair> corpus(parallel.begin(), parallel.end());
    corpus.reserve(2 * parallel.size());
    for (std::size_t i = 0; i < parallel.size(); ++i) corpus.push_back(synthetic[idx[i]]);
    rng.shuffle(corpus);
    corpora.push_back(std::move(corpus));
  }
  return corpora;
}

std::vector<SentencePair> construct_big(std::span<const SentencePair> parallel,
                                        std::span<const SentencePair> synthetic,
                                        const MixturePlan& plan) {
  if (plan.parallel_repeat < 1) throw Error("parallel_repeat must be >= 1");
  std::vector<SentencePair> corpus;
  corpus.reserve(big_corpus_size(parallel.size(), synthetic.size(), plan.parallel_repeat));
  for (std::size_t r = 0; r < plan.parallel_repeat; ++r) {
    corpus.insert(corpus.end(), parallel.begin(), parallel.end());
  }
  corpus.insert(corpus.end(), synthetic.begin(), synthetic.end());
  Rng rng(mix_seed(plan.seed, plan.num_small_samples));
  rng.shuffle(corpus);
  return corpus;
}

}  // namespace cyclemt
