#include <cmath>
#include <map>
#include <random>
#include <set>

#include "doctest.h"
#include "testkit.hpp"

#include "cyclemt/error.hpp"
#include "cyclemt/ngram_lm.hpp"

using namespace cyclemt;

namespace {

// Direct count-table evaluation of the interpolated add-k mixture.
struct OracleLm {
  int order;
  double k;
  std::vector<double> lambdas;
  std::map<std::vector<std::string>, double> ngram;
  std::map<std::vector<std::string>, double> context;
  std::set<std::string> vocab;  // predictable symbols

  OracleLm(const std::vector<std::vector<std::string>>& corpus, int n, double kk, std::vector<double> l)
      : order(n), k(kk), lambdas(std::move(l)) {
    vocab = {"</s>", "<unk>"};
    for (const auto& s : corpus) vocab.insert(s.begin(), s.end());
    for (const auto& s : corpus) {
      std::vector<std::string> seq(static_cast<std::size_t>(n - 1), "<s>");
      seq.insert(seq.end(), s.begin(), s.end());
      seq.push_back("</s>");
      for (std::size_t pos = static_cast<std::size_t>(n - 1); pos < seq.size(); ++pos) {
        for (int j = 1; j <= n; ++j) {
          std::vector<std::string> g(seq.begin() + static_cast<long>(pos) + 1 - j, seq.begin() + static_cast<long>(pos) + 1);
          ngram[g] += 1;
          g.pop_back();
          context[g] += 1;
        }
      }
    }
  }

  double prob(std::vector<std::string> history, const std::string& w) const {
    const std::string word = vocab.count(w) ? w : "<unk>";
    while (history.size() < static_cast<std::size_t>(order)) history.insert(history.begin(), "<s>");
    double p = 0.0;
    const double v = static_cast<double>(vocab.size());
    for (int j = 1; j <= order; ++j) {
      std::vector<std::string> ctx(history.end() - (j - 1), history.end());
      const auto c_it = context.find(ctx);
      const double c_ctx = c_it == context.end() ? 0.0 : c_it->second;
      ctx.push_back(word);
      const auto n_it = ngram.find(ctx);
      const double c = n_it == ngram.end() ? 0.0 : n_it->second;
      p += lambdas[static_cast<std::size_t>(j - 1)] * (c + k) / (c_ctx + k * v);
    }
    return p;
  }

  double logprob(const std::vector<std::string>& s) const {
    std::vector<std::string> h;
    double total = 0.0;
    for (const auto& w : s) {
      total += std::log(prob(h, w));
      h.push_back(vocab.count(w) ? w : "<unk>");
    }
    return total + std::log(prob(h, "</s>"));
  }
};

std::vector<std::vector<std::string>> random_corpus(std::mt19937_64& rng, std::size_t n, int symbols) {
  std::vector<std::vector<std::string>> corpus;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::string> s;
    const auto len = rng() % 7;
    for (std::size_t t = 0; t < len; ++t) s.push_back("w" + std::to_string(rng() % symbols));
    corpus.push_back(s);
  }
  return corpus;
}

NgramLm::WordId id_of(const NgramLm& lm, const std::string& w) { return lm.id(w); }

std::u32string history_ids(const NgramLm& lm, const std::vector<std::string>& h) {
  std::u32string out;
  for (const auto& w : h) out.push_back(static_cast<char32_t>(lm.id(w)));
  return out;
}

}  // namespace

TEST_CASE("unigram maximum-likelihood limit") {
  const std::vector<std::vector<std::string>> corpus{testkit::words("a a a b")};
  LmOptions o;
  o.order = 1;
  o.k = 1e-12;
  const auto lm = NgramLm::train(corpus, o);
  const double pa = lm.prob({}, id_of(lm, "a"));
  const double pb = lm.prob({}, id_of(lm, "b"));
  CHECK(pa / (pa + pb) == doctest::Approx(0.75).epsilon(1e-9));
  CHECK(pb / (pa + pb) == doctest::Approx(0.25).epsilon(1e-9));
}

TEST_CASE("bigram maximum-likelihood limit") {
  const std::vector<std::vector<std::string>> corpus{testkit::words("a b"), testkit::words("a b")};
  LmOptions o;
  o.order = 2;
  o.k = 1e-12;
  o.lambdas = {0.0, 1.0};
  const auto lm = NgramLm::train(corpus, o);
  CHECK(lm.prob(history_ids(lm, {"a"}), id_of(lm, "b")) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("errors") {
  CHECK_THROWS_AS(NgramLm::train(std::vector<std::vector<std::string>>{}), Error);
  const std::vector<std::vector<std::string>> corpus{testkit::words("a b")};
  LmOptions bad;
  bad.order = 2;
  bad.lambdas = {0.3, 0.3};
  CHECK_THROWS_WITH_AS(NgramLm::train(corpus, bad), doctest::Contains("invalid lambdas"), Error);
  bad.lambdas = {1.5, -0.5};
  CHECK_THROWS_AS(NgramLm::train(corpus, bad), Error);
  bad.lambdas = {0.5};
  CHECK_THROWS_AS(NgramLm::train(corpus, bad), Error);
  LmOptions zero;
  zero.order = 0;
  CHECK_THROWS_AS(NgramLm::train(corpus, zero), Error);
}

TEST_CASE("probabilities match an independent count-table evaluation") {
  std::mt19937_64 rng(41);
  for (int round = 0; round < 40; ++round) {
    const auto corpus = random_corpus(rng, 1 + rng() % 30, 2 + static_cast<int>(rng() % 8));
    LmOptions o;
    o.order = 1 + static_cast<int>(rng() % 4);
    o.k = 0.01 + static_cast<double>(rng() % 100) / 50.0;
    const auto lm = NgramLm::train(corpus, o);
    const OracleLm oracle(corpus, o.order, o.k, default_lambdas(o.order));
    CHECK(lm.vocab_size() == oracle.vocab.size());
    for (const auto& s : random_corpus(rng, 10, 12)) {
      CHECK(lm.logprob(s) == doctest::Approx(oracle.logprob(s)).epsilon(1e-12));
    }
  }
}

TEST_CASE("conditional distributions normalize for random histories") {
  std::mt19937_64 rng(43);
  for (int round = 0; round < 30; ++round) {
    const auto corpus = random_corpus(rng, 20, 6);
    LmOptions o;
    o.order = 1 + static_cast<int>(rng() % 4);
    o.k = 0.05 + static_cast<double>(rng() % 10) / 10.0;
    const auto lm = NgramLm::train(corpus, o);
    for (int h = 0; h < 10; ++h) {
      std::u32string history;
      for (std::size_t i = 0; i < rng() % 4; ++i) {
        // Any id except <s>, plus the odd <s> as real padding.
        history.push_back(static_cast<char32_t>(rng() % lm.words().size()));
      }
      double sum = 0.0;
      for (NgramLm::WordId w = 0; w < lm.words().size(); ++w) {
        if (w != NgramLm::kBos) sum += lm.prob(history, w);
      }
      CHECK(std::abs(sum - 1.0) <= 1e-9);
    }
  }
}

TEST_CASE("larger k moves conditionals toward uniform") {
  std::mt19937_64 rng(47);
  const auto corpus = random_corpus(rng, 25, 5);
  for (int order = 1; order <= 3; ++order) {
    std::vector<double> lambdas(static_cast<std::size_t>(order), 0.0);
    lambdas.back() = 1.0;
    double previous = 1e300;
    for (double k : {0.001, 0.01, 0.1, 0.5, 1.0, 5.0, 50.0}) {
      LmOptions o;
      o.order = order;
      o.k = k;
      o.lambdas = lambdas;
      const auto lm = NgramLm::train(corpus, o);
      const double uniform = 1.0 / static_cast<double>(lm.vocab_size());
      double dist = 0.0;
      for (const auto& h : std::vector<std::u32string>{{}, {3}, {4, 5}, {NgramLm::kBos, 3}}) {
        for (NgramLm::WordId w = 0; w < lm.words().size(); ++w) {
          if (w != NgramLm::kBos) dist = std::max(dist, std::abs(lm.prob(h, w) - uniform));
        }
      }
      CHECK(dist <= previous + 1e-15);
      previous = dist;
    }
  }
}

TEST_CASE("perplexity properties") {
  const std::vector<std::vector<std::string>> corpus{testkit::words("a b c"), testkit::words("b c d")};
  LmOptions flat;
  flat.order = 1;
  flat.k = 1e12;
  const auto uniform = NgramLm::train(corpus, flat);
  std::vector<Sentence> held{make_sentence(testkit::words("a d")), make_sentence(testkit::words("zz"))};
  CHECK(uniform.perplexity(held) == doctest::Approx(static_cast<double>(uniform.vocab_size())).epsilon(1e-6));

  std::vector<Sentence> train;
  for (const auto& s : corpus) train.push_back(make_sentence(s));
  const auto lm = NgramLm::train(train);
  std::vector<Sentence> disjoint{make_sentence(testkit::words("x y z")), make_sentence(testkit::words("q"))};
  CHECK(lm.perplexity(train) >= 1.0);
  CHECK(lm.perplexity(disjoint) >= 1.0);
  CHECK(lm.perplexity(train) <= lm.perplexity(disjoint));
  CHECK_THROWS_AS(lm.perplexity(std::vector<Sentence>{}), Error);
}

TEST_CASE("log-probabilities are non-positive and unigram scores add up") {
  std::mt19937_64 rng(53);
  const auto corpus = random_corpus(rng, 30, 6);
  LmOptions uni;
  uni.order = 1;
  const auto lm = NgramLm::train(corpus, uni);
  const double eos = std::log(lm.prob({}, NgramLm::kEos));
  for (int i = 0; i < 50; ++i) {
    const auto pair = random_corpus(rng, 2, 9);
    auto joined = pair[0];
    joined.insert(joined.end(), pair[1].begin(), pair[1].end());
    CHECK(lm.logprob(pair[0]) <= 0.0);
    CHECK(lm.logprob(joined) + eos == doctest::Approx(lm.logprob(pair[0]) + lm.logprob(pair[1])).epsilon(1e-12));
    CHECK(lm.per_token_logprob(pair[0]) ==
          doctest::Approx(lm.logprob(pair[0]) / static_cast<double>(pair[0].size() + 1)));
  }
}

TEST_CASE("incremental scoring equals whole-sentence scoring") {
  std::mt19937_64 rng(59);
  const auto corpus = random_corpus(rng, 30, 6);
  const auto lm = NgramLm::train(corpus);
  for (const auto& s : random_corpus(rng, 20, 7)) {
    auto state = lm.initial_state();
    double total = 0.0;
    for (const auto& w : s) total += lm.score(state, lm.id(w));
    total += lm.score(state, NgramLm::kEos);
    CHECK(total == lm.logprob(s));
  }
}

TEST_CASE("model file roundtrip") {
  testkit::TempDir dir("lm");
  std::mt19937_64 rng(61);
  const auto corpus = random_corpus(rng, 30, 6);
  LmOptions o;
  o.order = 3;
  o.k = 0.3;
  o.lambdas = {0.2, 0.3, 0.5};
  const auto lm = NgramLm::train(corpus, o);
  lm.save(dir.path() / "lm.txt");
  const auto back = NgramLm::load(dir.path() / "lm.txt");
  CHECK(back.order() == 3);
  CHECK(back.lambdas() == lm.lambdas());
  for (const auto& s : random_corpus(rng, 20, 8)) CHECK(back.logprob(s) == lm.logprob(s));
  testkit::write_file(dir.path() / "junk.txt", "hello\n");
  CHECK_THROWS_AS(NgramLm::load(dir.path() / "junk.txt"), FormatError);
}
