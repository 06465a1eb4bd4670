#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>

#include "doctest.h"
#include "testkit.hpp"

#include "cyclemt/augment.hpp"
#include "cyclemt/cipher.hpp"
#include "cyclemt/error.hpp"
#include "cyclemt/metrics.hpp"

using namespace cyclemt;

namespace {

class IdentityTranslator final : public Translator {
 public:
  const std::string& id() const override { return id_; }
  NBestList translate(const Sentence& source, std::size_t) const override {
    NBestList out;
    out.source = source;
    Hypothesis h;
    h.tokens = source.tokens;
    out.hyps.push_back(h);
    return out;
  }
  double score(std::span<const std::string>, std::span<const std::string>) const override { return 0.0; }

 private:
  std::string id_ = "identity";
};

// Appends a marker token; throws on sentences starting with "boom".
class MarkingTranslator final : public Translator {
 public:
  const std::string& id() const override { return id_; }
  NBestList translate(const Sentence& source, std::size_t) const override {
    if (!source.tokens.empty() && source.tokens[0] == "boom") throw Error("decode failed");
    NBestList out;
    Hypothesis h;
    h.tokens = source.tokens;
    if (!h.tokens.empty()) h.tokens.push_back("+");
    out.hyps.push_back(h);
    return out;
  }
  double score(std::span<const std::string>, std::span<const std::string>) const override { return 0.0; }

 private:
  std::string id_ = "marking";
};

std::vector<SentencePair> numbered_pairs(const std::string& tag, std::size_t n) {
  std::vector<SentencePair> out;
  for (std::size_t i = 0; i < n; ++i) {
    SentencePair p;
    p.src = make_sentence({tag + "s" + std::to_string(i)});
    p.tgt = make_sentence({tag + "t" + std::to_string(i)});
    out.push_back(p);
  }
  return out;
}

std::multiset<std::string> keys(const std::vector<SentencePair>& pairs) {
  std::multiset<std::string> out;
  for (const auto& p : pairs) out.insert(join(p.src.tokens) + "|" + join(p.tgt.tokens));
  return out;
}

std::vector<SentencePair> tokenized_pairs(const std::vector<std::string>& src, const std::vector<std::string>& tgt) {
  std::vector<SentencePair> out;
  for (std::size_t i = 0; i < src.size(); ++i) {
    SentencePair p;
    p.src = tokenize(src[i], "s");
    p.tgt = tokenize(tgt[i], "t");
    out.push_back(p);
  }
  return out;
}

CipherOptions clean_cipher() {
  CipherOptions o;
  o.parallel = 2000;
  o.mono = 3000;
  o.dev = 0;
  o.test = 200;
  o.nouns = 120;
  o.mono_noise = 0.0;
  o.parallel_misaligned = 0.0;
  o.parallel_illegal = 0.0;
  o.parallel_short = 0.0;
  o.parallel_split_ranges = 0.0;
  return o;
}

}  // namespace

TEST_CASE("rng draws") {
  Rng a(5), b(5);
  for (int i = 0; i < 100; ++i) {
    const auto x = a.below(7);
    CHECK(x < 7);
    CHECK(x == b.below(7));
  }
  CHECK_THROWS_AS(a.below(0), Error);
  std::set<std::uint64_t> streams;
  for (std::uint64_t s = 0; s < 50; ++s) streams.insert(mix_seed(1, s));
  CHECK(streams.size() == 50);
}

TEST_CASE("back translation pairs targets with translator output") {
  const IdentityTranslator id;
  const std::vector<Sentence> mono{make_sentence({"a", "b"}), make_sentence({"c"})};
  const auto bt = back_translate(id, mono);
  REQUIRE(bt.pairs.size() == 2);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(bt.pairs[i].src.tokens == mono[i].tokens);
    CHECK(bt.pairs[i].tgt.tokens == mono[i].tokens);
    CHECK(bt.pairs[i].origin == Origin::synthetic_back);
  }

  const MarkingTranslator marking;
  const std::vector<Sentence> mixed{make_sentence({"x"}), make_sentence({"boom", "y"}), make_sentence({}),
                                    make_sentence({"z"})};
  const auto bt2 = back_translate(marking, mixed);
  CHECK(bt2.skipped == 2);
  CHECK(bt2.source_index == std::vector<std::size_t>{0, 3});
  CHECK(bt2.pairs[1].src.tokens == testkit::words("z +"));
}

TEST_CASE("cycle translation rewrites exactly the lowest-scored sentences") {
  const IdentityTranslator id;
  const MarkingTranslator marking;
  std::mt19937_64 rng(211);
  for (int round = 0; round < 100; ++round) {
    const std::size_t n = 1 + rng() % 30;
    std::vector<Sentence> mono;
    std::vector<double> scores;
    for (std::size_t i = 0; i < n; ++i) {
      mono.push_back(make_sentence({"w" + std::to_string(i)}));
      scores.push_back(static_cast<double>(rng() % 5));
    }
    const double ratio = static_cast<double>(rng() % 5) / 4.0;
    const auto out = cycle_translate(id, marking, mono, scores, {ratio});
    // Oracle: stable ascending ranking, take floor(ratio * n).
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    const auto k = static_cast<std::size_t>(ratio * static_cast<double>(n));
    std::set<std::size_t> chosen(order.begin(), order.begin() + static_cast<long>(k));
    std::size_t changed = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const bool expect = chosen.count(i) > 0;
      CHECK(out.cycled[i] == expect);
      if (expect) {
        CHECK(out.sentences[i].tokens == testkit::words("w" + std::to_string(i) + " +"));
      } else {
        CHECK(out.sentences[i].tokens == mono[i].tokens);
      }
      changed += out.sentences[i].tokens != mono[i].tokens;
    }
    CHECK(changed <= static_cast<std::size_t>(std::ceil(ratio * static_cast<double>(n))));
  }
}

TEST_CASE("cycle translation identities") {
  const IdentityTranslator id;
  const MarkingTranslator marking;
  const std::vector<Sentence> mono{make_sentence({"a"}), make_sentence({"b", "c"}), make_sentence({"d"})};
  const std::vector<double> scores{-1, -3, -2};
  const auto zero = cycle_translate(marking, marking, mono, scores, {0.0});
  for (std::size_t i = 0; i < mono.size(); ++i) CHECK(zero.sentences[i].tokens == mono[i].tokens);
  const auto full = cycle_translate(id, id, mono, scores, {1.0});
  for (std::size_t i = 0; i < mono.size(); ++i) CHECK(full.sentences[i].tokens == mono[i].tokens);
  CHECK(std::count(full.cycled.begin(), full.cycled.end(), true) == 3);
  CHECK_THROWS_AS(cycle_translate(id, id, mono, scores, {1.5}), Error);
  CHECK_THROWS_AS(cycle_translate(id, id, mono, std::vector<double>{1.0}, {0.5}), Error);
}

TEST_CASE("cycle translation improves LM scores of shuffled text") {
  auto o = clean_cipher();
  o.test = 0;
  const auto c = generate_cipher(o);
  const auto pairs = tokenized_pairs(c.train_src, c.train_tgt);
  ToyTrainOptions s2t_opts, t2s_opts;
  t2s_opts.direction = Direction::t2s;
  const ToyTranslator s2t(toy_train(pairs, s2t_opts));
  const ToyTranslator t2s(toy_train(pairs, t2s_opts));
  std::vector<std::vector<std::string>> clean;
  for (const auto& p : pairs) clean.push_back(p.tgt.tokens);
  const auto lm = NgramLm::train(clean);

  // Half of the monolingual sentences get their tokens shuffled.
  std::mt19937_64 rng(223);
  std::vector<Sentence> mono;
  for (std::size_t i = 0; i < 1000; ++i) {
    auto s = tokenize(c.mono_tgt[i], "t");
    if (i % 2 == 0) std::shuffle(s.tokens.begin(), s.tokens.end(), rng);
    mono.push_back(make_sentence(s.tokens, "t"));
  }
  std::vector<double> scores;
  for (const auto& s : mono) scores.push_back(lm.per_token_logprob(s.tokens));
  const auto out = cycle_translate(t2s, s2t, mono, scores, {0.5});
  double before = 0.0, after = 0.0;
  for (std::size_t i = 0; i < mono.size(); ++i) {
    before += scores[i];
    after += lm.per_token_logprob(out.sentences[i].tokens);
  }
  CHECK(after / 1000.0 > before / 1000.0);
}

TEST_CASE("back-translated cipher data alone trains a strong model") {
  const auto c = generate_cipher(clean_cipher());
  const auto pairs = tokenized_pairs(c.train_src, c.train_tgt);
  ToyTrainOptions t2s_opts;
  t2s_opts.direction = Direction::t2s;
  const ToyTranslator t2s(toy_train(pairs, t2s_opts));
  std::vector<Sentence> mono;
  for (const auto& line : c.mono_tgt) mono.push_back(tokenize(line, "t"));
  const auto bt = back_translate(t2s, mono);
  CHECK(bt.skipped == 0);
  const auto model = toy_train(bt.pairs);
  std::vector<std::string> hyps;
  for (const auto& line : c.test_src) hyps.push_back(detokenize(decode(model, tokenize(line), 1).hyps[0].tokens));
  std::vector<std::string> refs;
  for (const auto& line : c.test_ref) refs.push_back(detokenize(tokenize(line).tokens));
  CHECK(bleu_corpus(hyps, refs).bleu > 90.0);
}

TEST_CASE("mixture sizes") {
  CHECK(small_corpus_size(5831606, 75940978) == 11663212);
  CHECK(big_corpus_size(5831606, 75940978, 13) == 151751856);
  CHECK_THROWS_WITH_AS(small_corpus_size(10, 9), doctest::Contains("big mode"), Error);
  std::mt19937_64 rng(227);
  for (int i = 0; i < 200; ++i) {
    const std::size_t p = rng() % 1000000, s = p + rng() % 1000000, r = 1 + rng() % 20;
    CHECK(small_corpus_size(p, s) == 2 * p);
    CHECK(big_corpus_size(p, s, r) == r * p + s);
  }
}

TEST_CASE("small construction") {
  const auto parallel = numbered_pairs("p", 30);
  const auto synthetic = numbered_pairs("y", 70);
  MixturePlan plan;
  plan.seed = 9;
  const auto corpora = construct_small(parallel, synthetic, plan);
  REQUIRE(corpora.size() == 8);
  const auto par_keys = keys(parallel);
  const auto syn_keys = keys(synthetic);
  for (const auto& corpus : corpora) {
    CHECK(corpus.size() == 60);
    std::multiset<std::string> from_par, from_syn;
    for (const auto& k : keys(corpus)) (par_keys.count(k) ? from_par : from_syn).insert(k);
    CHECK(from_par == par_keys);
    CHECK(from_syn.size() == 30);
    CHECK(std::set<std::string>(from_syn.begin(), from_syn.end()).size() == 30);  // no replacement
    for (const auto& k : from_syn) CHECK(syn_keys.count(k) == 1);
  }
  CHECK(keys(corpora[0]) != keys(corpora[1]));

  const auto again = construct_small(parallel, synthetic, plan);
  for (std::size_t k = 0; k < corpora.size(); ++k) CHECK(keys(again[k]) == keys(corpora[k]));
  for (std::size_t i = 0; i < corpora[3].size(); ++i) CHECK(again[3][i].src.tokens == corpora[3][i].src.tokens);

  MixturePlan one;
  one.num_small_samples = 1;
  const auto dup = construct_small(parallel, parallel, one);
  auto doubled = keys(parallel);
  for (const auto& k : keys(parallel)) doubled.insert(k);
  CHECK(keys(dup[0]) == doubled);

  CHECK_THROWS_AS(construct_small(synthetic, parallel, plan), Error);
}

TEST_CASE("big construction") {
  const auto parallel = numbered_pairs("p", 25);
  MixturePlan plan;
  plan.parallel_repeat = 1;
  const auto shuffled = construct_big(parallel, {}, plan);
  CHECK(keys(shuffled) == keys(parallel));
  bool moved = false;
  for (std::size_t i = 0; i < parallel.size(); ++i) moved = moved || shuffled[i].src.tokens != parallel[i].src.tokens;
  CHECK(moved);

  const auto synthetic = numbered_pairs("y", 40);
  plan.parallel_repeat = 13;
  const auto big = construct_big(parallel, synthetic, plan);
  CHECK(big.size() == 13 * 25 + 40);
  std::map<std::string, int> count;
  for (const auto& k : keys(big)) ++count[k];
  for (const auto& k : keys(parallel)) CHECK(count[k] == 13);
  for (const auto& k : keys(synthetic)) CHECK(count[k] == 1);
  const auto again = construct_big(parallel, synthetic, plan);
  for (std::size_t i = 0; i < big.size(); ++i) CHECK(again[i].src.tokens == big[i].src.tokens);
  plan.parallel_repeat = 0;
  CHECK_THROWS_AS(construct_big(parallel, synthetic, plan), Error);
}
