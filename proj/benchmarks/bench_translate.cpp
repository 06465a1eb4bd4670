#include <benchmark/benchmark.h>

#include "cyclemt/align.hpp"
#include "cyclemt/cipher.hpp"
#include "cyclemt/ngram_lm.hpp"
#include "cyclemt/toymt.hpp"

using namespace cyclemt;

namespace {

struct Data {
  std::vector<SentencePair> pairs;
  std::vector<Sentence> dev;
};

const Data& data() {
  static const Data d = [] {
    CipherOptions o;
    o.parallel = 2000;
    o.mono = 0;
    o.dev = 100;
    o.test = 0;
    const auto c = generate_cipher(o);
    Data out;
    for (std::size_t i = 0; i < c.train_src.size(); ++i) {
      SentencePair p;
      p.src = tokenize(c.train_src[i], "s");
      p.tgt = tokenize(c.train_tgt[i], "t");
      out.pairs.push_back(p);
    }
    for (const auto& l : c.dev_src) out.dev.push_back(tokenize(l, "s"));
    return out;
  }();
  return d;
}

void BM_LmTrain(benchmark::State& state) {
  std::vector<std::vector<std::string>> text;
  for (const auto& p : data().pairs) text.push_back(p.tgt.tokens);
  for (auto _ : state) benchmark::DoNotOptimize(NgramLm::train(text));
}
BENCHMARK(BM_LmTrain)->Unit(benchmark::kMillisecond);

void BM_Ibm1(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(ibm1_train(data().pairs, static_cast<std::size_t>(state.range(0))));
}
BENCHMARK(BM_Ibm1)->Arg(1)->Arg(5)->Unit(benchmark::kMillisecond);

void BM_Decode(benchmark::State& state) {
  ToyTrainOptions o;
  o.beam = static_cast<std::size_t>(state.range(0));
  const auto spec = toy_train(data().pairs, o);
  for (auto _ : state) {
    for (const auto& s : data().dev) benchmark::DoNotOptimize(decode(spec, s, 1));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long>(data().dev.size()));
}
BENCHMARK(BM_Decode)->Arg(1)->Arg(10)->Arg(30)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
