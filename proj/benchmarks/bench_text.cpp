#include <random>

#include <benchmark/benchmark.h>

#include "cyclemt/combine.hpp"
#include "cyclemt/corpus.hpp"
#include "cyclemt/metrics.hpp"
#include "cyclemt/subword.hpp"

using namespace cyclemt;

namespace {

std::vector<std::string> lines(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) {
    std::string s;
    for (std::size_t w = 0; w < 5 + rng() % 20; ++w) {
      if (w) s += ' ';
      for (std::size_t c = 0; c < 2 + rng() % 8; ++c) s.push_back(static_cast<char>('a' + rng() % 20));
      if (rng() % 8 == 0) s += ",";
    }
    out.push_back(s + ".");
  }
  return out;
}

std::vector<Sentence> tokenized(std::size_t n) {
  std::vector<Sentence> out;
  for (const auto& l : lines(n, 1)) out.push_back(tokenize(l));
  return out;
}

void BM_Tokenize(benchmark::State& state) {
  const auto text = lines(1000, 2);
  for (auto _ : state) {
    for (const auto& t : text) benchmark::DoNotOptimize(tokenize(t));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long>(text.size()));
}
BENCHMARK(BM_Tokenize);

void BM_BpeLearn(benchmark::State& state) {
  const auto corpus = tokenized(2000);
  for (auto _ : state) benchmark::DoNotOptimize(bpe_learn(corpus, static_cast<std::size_t>(state.range(0))));
}
BENCHMARK(BM_BpeLearn)->Arg(100)->Arg(1000)->Unit(benchmark::kMillisecond);

void BM_BpeApply(benchmark::State& state) {
  const auto corpus = tokenized(2000);
  const auto model = bpe_learn(corpus, 1000);
  for (auto _ : state) {
    for (const auto& s : corpus) benchmark::DoNotOptimize(bpe_apply(model, s));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long>(corpus.size()));
}
BENCHMARK(BM_BpeApply)->Unit(benchmark::kMillisecond);

void BM_CorpusBleu(benchmark::State& state) {
  const auto hyps = lines(2000, 3), refs = lines(2000, 4);
  for (auto _ : state) benchmark::DoNotOptimize(bleu_corpus(hyps, refs));
}
BENCHMARK(BM_CorpusBleu)->Unit(benchmark::kMillisecond);

void BM_CombineSentence(benchmark::State& state) {
  std::mt19937_64 rng(5);
  const auto base = tokenized(1)[0].tokens;
  std::vector<SystemOutput> outputs;
  for (int k = 0; k < state.range(0); ++k) {
    auto t = base;
    for (auto& w : t) {
      if (rng() % 5 == 0) w = "x";
    }
    outputs.push_back({"m" + std::to_string(k), t});
  }
  for (auto _ : state) benchmark::DoNotOptimize(combine_sentence(outputs));
}
BENCHMARK(BM_CombineSentence)->Arg(2)->Arg(4)->Arg(8);

}  // namespace

BENCHMARK_MAIN();
