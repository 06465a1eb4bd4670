#include <cmath>
#include <random>

#include "doctest.h"
#include "testkit.hpp"

#include "cyclemt/cipher.hpp"
#include "cyclemt/dataselect.hpp"
#include "cyclemt/error.hpp"
#include "cyclemt/rerank.hpp"

using namespace cyclemt;

namespace {

constexpr std::size_t kOracleSlot = 3;

Hypothesis with_features(const FeatureVector& f) {
  Hypothesis h;
  for (std::size_t d = 0; d < kNumFeatures; ++d) h.features[std::string(kFeatureNames[d])] = f[d];
  return h;
}

// Lists where slot 3 carries the gain itself and l2r carries noise that the
// initial weights trust.
std::vector<NBestList> separable_lists(std::mt19937_64& rng, std::size_t lists, std::size_t k) {
  std::uniform_real_distribution<double> gain(0.0, 100.0), noise(-50.0, 50.0), small(-1.0, 1.0);
  std::vector<NBestList> out(lists);
  for (auto& list : out) {
    for (std::size_t j = 0; j < k; ++j) {
      FeatureVector f{};
      for (auto& x : f) x = small(rng);
      f[0] = noise(rng);
      f[kOracleSlot] = gain(rng);
      list.hyps.push_back(with_features(f));
    }
  }
  return out;
}

double oracle_gain(std::size_t, const Hypothesis& h) { return h.features.at(std::string(kFeatureNames[kOracleSlot])); }

std::size_t argmax_gain(const NBestList& list) {
  std::size_t best = 0;
  for (std::size_t j = 1; j < list.hyps.size(); ++j) {
    if (oracle_gain(0, list.hyps[j]) > oracle_gain(0, list.hyps[best])) best = j;
  }
  return best;
}

std::vector<SentencePair> tokenized_pairs(const CipherCorpus& c) {
  std::vector<SentencePair> out;
  for (std::size_t i = 0; i < c.train_src.size(); ++i) {
    SentencePair p;
    p.src = tokenize(c.train_src[i], "s");
    p.tgt = tokenize(c.train_tgt[i], "t");
    out.push_back(p);
  }
  return out;
}

}  // namespace

TEST_CASE("MIRA recovers a separating feature on held-out lists") {
  std::mt19937_64 rng(307);
  const auto train = separable_lists(rng, 200, 12);
  const auto held = separable_lists(rng, 500, 12);
  const auto model = mira_train(train, oracle_gain);
  std::size_t hits = 0;
  for (const auto& list : held) {
    const auto best = argmax_gain(list);
    const auto reranked = rerank_apply(model, list);
    hits += reranked.hyps[0].features == list.hyps[best].features;
  }
  CHECK(static_cast<double>(hits) / static_cast<double>(held.size()) >= 0.95);
  CHECK(model.weights[kOracleSlot] > 0.0);
}

TEST_CASE("reranking is invariant to positive weight scaling") {
  std::mt19937_64 rng(311);
  const auto lists = separable_lists(rng, 50, 10);
  std::uniform_real_distribution<double> w(-2.0, 2.0);
  for (int round = 0; round < 20; ++round) {
    MiraModel a;
    for (auto& x : a.weights) x = w(rng);
    MiraModel b = a;
    const double scale = 0.001 + static_cast<double>(rng() % 1000);
    for (auto& x : b.weights) x *= scale;
    for (const auto& list : lists) {
      const auto ra = rerank_apply(a, list);
      const auto rb = rerank_apply(b, list);
      for (std::size_t j = 0; j < ra.hyps.size(); ++j) CHECK(ra.hyps[j].features == rb.hyps[j].features);
    }
  }
}

TEST_CASE("degenerate training keeps the initial weights") {
  std::mt19937_64 rng(313);
  const auto lists = separable_lists(rng, 30, 8);
  MiraConfig frozen;
  frozen.C = 0.0;
  frozen.init = {0.5, -1, 2, 0, 0.25, 1};
  CHECK(mira_train(lists, oracle_gain, frozen).weights == frozen.init);

  std::vector<NBestList> same(10);
  for (auto& list : same) {
    FeatureVector f{};
    for (auto& x : f) x = static_cast<double>(rng() % 10);
    for (int j = 0; j < 5; ++j) list.hyps.push_back(with_features(f));
  }
  MiraConfig cfg;
  cfg.init = {1, 2, 3, 4, 5, 6};
  CHECK(mira_train(same, [](std::size_t, const Hypothesis&) { return 1.0; }, cfg).weights == cfg.init);

  CHECK_THROWS_AS(mira_train(std::vector<NBestList>{}, oracle_gain), Error);
  cfg.C = -1.0;
  CHECK_THROWS_AS(mira_train(lists, oracle_gain, cfg), Error);
}

TEST_CASE("zero weights keep the original order") {
  std::mt19937_64 rng(317);
  const auto lists = separable_lists(rng, 20, 9);
  MiraModel zero;
  zero.weights = {};
  for (const auto& list : lists) {
    const auto out = rerank_apply(zero, list);
    for (std::size_t j = 0; j < list.hyps.size(); ++j) CHECK(out.hyps[j].features == list.hyps[j].features);
  }
}

TEST_CASE("reranked lists are sorted by model score") {
  std::mt19937_64 rng(331);
  const auto lists = separable_lists(rng, 40, 10);
  const auto model = mira_train(lists, oracle_gain);
  for (const auto& list : lists) {
    const auto out = rerank_apply(model, list);
    for (std::size_t j = 1; j < out.hyps.size(); ++j) {
      CHECK(dot(model.weights, feature_vector(out.hyps[j - 1])) >= dot(model.weights, feature_vector(out.hyps[j])));
    }
  }
  Hypothesis bare;
  CHECK_THROWS_WITH_AS(feature_vector(bare), doctest::Contains("l2r_score"), Error);
}

TEST_CASE("feature extraction") {
  CipherOptions o;
  o.parallel = 800;
  o.mono = 0;
  o.dev = 20;
  o.test = 0;
  o.nouns = 40;
  o.parallel_misaligned = 0.0;
  o.parallel_illegal = 0.0;
  o.parallel_short = 0.0;
  o.parallel_split_ranges = 0.0;
  const auto c = generate_cipher(o);
  const auto pairs = tokenized_pairs(c);
  ToyTrainOptions l2r_o, r2l_o, t2s_o;
  r2l_o.orientation = Orientation::r2l;
  t2s_o.direction = Direction::t2s;
  const auto l2r = toy_train(pairs, l2r_o);
  const auto r2l = toy_train(pairs, r2l_o);
  const auto t2s = toy_train(pairs, t2s_o);
  std::vector<std::vector<std::string>> tgt;
  for (const auto& p : pairs) tgt.push_back(p.tgt.tokens);
  const auto lm = NgramLm::train(tgt);
  const auto ibm1 = ibm1_train(pairs, 5);
  const auto ibm2 = ibm2_train(pairs, 5, ibm1.lexicon);

  FeatureScorers s;
  s.l2r = &l2r;
  s.r2l = &r2l;
  s.t2s = &t2s;
  s.lm = &lm;
  s.lex = &ibm2.lexicon;
  s.dist = &ibm2.distortion;

  for (const auto& line : c.dev_src) {
    auto list = decode(l2r, tokenize(line, "s"), 5);
    extract_features(list, s);
    for (const auto& h : list.hyps) {
      const auto f = feature_vector(h);
      CHECK(f[0] == doctest::Approx(h.logscore).epsilon(1e-12));
      CHECK(f[1] == doctest::Approx(score_hypothesis(r2l, list.source.tokens, h.tokens).logscore).epsilon(1e-12));
      CHECK(f[2] == doctest::Approx(score_hypothesis(t2s, h.tokens, list.source.tokens).logscore).epsilon(1e-12));
      CHECK(f[3] == lm.logprob(h.tokens));
      CHECK(f[4] == align_viterbi(ibm2.lexicon, ibm2.distortion, list.source.tokens, h.tokens).score);
      CHECK(f[5] == ratio_score(list.source.tokens.size(), h.tokens.size(), 0.76));
      CHECK(f[5] >= 0.0);
    }
  }

  // A 19-token source with a 25-token output sits at the optimal ratio.
  NBestList at_optimum;
  at_optimum.source = make_sentence(std::vector<std::string>(19, "x"));
  Hypothesis h;
  h.tokens.assign(25, "y");
  at_optimum.hyps.push_back(h);
  Hypothesis empty;
  at_optimum.hyps.push_back(empty);
  extract_features(at_optimum, s);
  CHECK(at_optimum.hyps[0].features.at("ratio_deviation") == 0.0);
  CHECK(at_optimum.hyps[1].features.at("align_score") == doctest::Approx(std::log(1e-9)));

  auto missing = s;
  missing.r2l = nullptr;
  NBestList list = decode(l2r, tokenize(c.dev_src[0], "s"), 2);
  CHECK_THROWS_WITH_AS(extract_features(list, missing), doctest::Contains("r2l_score"), Error);
  missing = s;
  missing.dist = nullptr;
  CHECK_THROWS_WITH_AS(extract_features(list, missing), doctest::Contains("align_score"), Error);
}

TEST_CASE("weights file roundtrip") {
  testkit::TempDir dir("rerank");
  MiraModel m;
  m.weights = {0.1, -2.5, 1e-7, 3.0, 0.0, 123.456};
  m.save(dir.path() / "w.txt");
  CHECK(MiraModel::load(dir.path() / "w.txt").weights == m.weights);
  testkit::write_file(dir.path() / "short.txt", "l2r_score\t1\n");
  CHECK_THROWS_AS(MiraModel::load(dir.path() / "short.txt"), FormatError);
  testkit::write_file(dir.path() / "bad.txt", "bogus\t1\n");
  CHECK_THROWS_AS(MiraModel::load(dir.path() / "bad.txt"), FormatError);
}
