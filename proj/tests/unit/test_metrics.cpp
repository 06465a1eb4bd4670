#include <cmath>
#include <map>
#include <random>

#include "doctest.h"
#include "testkit.hpp"

#include "cyclemt/error.hpp"
#include "cyclemt/metrics.hpp"

using namespace cyclemt;

namespace {

using Tokens = std::vector<std::string>;

std::map<Tokens, std::size_t> grams(const Tokens& t, std::size_t n) {
  std::map<Tokens, std::size_t> out;
  for (std::size_t i = 0; i + n <= t.size(); ++i) ++out[Tokens(t.begin() + static_cast<long>(i), t.begin() + static_cast<long>(i + n))];
  return out;
}

// Corpus BLEU from first principles.
double oracle_bleu(const std::vector<Tokens>& hyps, const std::vector<Tokens>& refs) {
  double m[4] = {}, t[4] = {}, hl = 0, rl = 0;
  for (std::size_t s = 0; s < hyps.size(); ++s) {
    hl += static_cast<double>(hyps[s].size());
    rl += static_cast<double>(refs[s].size());
    for (std::size_t n = 1; n <= 4; ++n) {
      const auto h = grams(hyps[s], n), r = grams(refs[s], n);
      for (const auto& [g, c] : h) {
        t[n - 1] += static_cast<double>(c);
        const auto it = r.find(g);
        if (it != r.end()) m[n - 1] += static_cast<double>(std::min(c, it->second));
      }
    }
  }
  double logp = 0.0;
  for (int n = 0; n < 4; ++n) {
    if (m[n] == 0) return 0.0;
    logp += std::log(m[n] / t[n]) / 4.0;
  }
  const double bp = hl >= rl ? 1.0 : std::exp(1.0 - rl / hl);
  return 100.0 * bp * std::exp(logp);
}

Tokens random_tokens(std::mt19937_64& rng, std::size_t max_len, int vocab) {
  Tokens t(rng() % (max_len + 1));
  for (auto& w : t) w = "w" + std::to_string(rng() % static_cast<unsigned>(vocab));
  return t;
}

}  // namespace

TEST_CASE("clipped unigram precision") {
  const auto r = bleu_corpus(std::vector<std::string>{"the the the the the the the"},
                             std::vector<std::string>{"the cat is on the mat"});
  CHECK(r.precisions[0] == doctest::Approx(2.0 / 7.0).epsilon(1e-12));
  CHECK(r.bleu == 0.0);
  const auto s = bleu_stats(testkit::words("the the the the the the the"), testkit::words("the cat is on the mat"));
  CHECK(s.matches[0] == 2);
  CHECK(s.totals[0] == 7);
}

TEST_CASE("brevity penalty closed form") {
  const std::vector<std::string> hyps{"a b c d e f"};
  const std::vector<std::string> refs{"a b c d e f g h i"};
  const auto r = bleu_corpus(hyps, refs);
  CHECK(r.precisions == std::array<double, 4>{1, 1, 1, 1});
  CHECK(r.bleu == doctest::Approx(100.0 * std::exp(1.0 - 9.0 / 6.0)).epsilon(1e-12));
  CHECK(r.bleu < 100.0);
}

TEST_CASE("identical corpora score 100") {
  std::mt19937_64 rng(601);
  for (int round = 0; round < 200; ++round) {
    std::vector<Tokens> x;
    for (int s = 0; s < 5; ++s) {
      auto t = random_tokens(rng, 12, 30);
      while (t.size() < 4) t.push_back("pad");
      x.push_back(t);
    }
    CHECK(bleu_corpus_tokens(x, x).bleu == doctest::Approx(100.0).epsilon(1e-12));
  }
  const std::vector<std::string> text{"Hello, world!", "It is 2006-07."};
  CHECK(bleu_corpus(text, text).bleu == doctest::Approx(100.0));
}

TEST_CASE("corpus score agrees with an independent computation") {
  std::mt19937_64 rng(607);
  for (int round = 0; round < 500; ++round) {
    std::vector<Tokens> hyps, refs;
    for (std::size_t s = 0; s < 1 + rng() % 8; ++s) {
      hyps.push_back(random_tokens(rng, 10, 4));
      refs.push_back(random_tokens(rng, 10, 4));
    }
    CHECK(bleu_corpus_tokens(hyps, refs).bleu == doctest::Approx(oracle_bleu(hyps, refs)).epsilon(1e-9));
  }
}

TEST_CASE("stats are additive and order-free") {
  std::mt19937_64 rng(613);
  for (int round = 0; round < 300; ++round) {
    std::vector<Tokens> hyps, refs;
    BleuStats sum;
    for (int s = 0; s < 6; ++s) {
      hyps.push_back(random_tokens(rng, 9, 5));
      refs.push_back(random_tokens(rng, 9, 5));
      const auto st = bleu_stats(hyps.back(), refs.back());
      for (std::size_t n = 0; n < 4; ++n) CHECK(st.matches[n] <= st.totals[n]);
      sum += st;
    }
    BleuStats joined;
    for (std::size_t s = 0; s < hyps.size(); ++s) joined = joined + bleu_stats(hyps[s], refs[s]);
    CHECK(joined == sum);
    CHECK(bleu_from_stats(sum).bleu == bleu_corpus_tokens(hyps, refs).bleu);

    std::vector<std::size_t> order{0, 1, 2, 3, 4, 5};
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<Tokens> ph, pr;
    for (const auto k : order) {
      ph.push_back(hyps[k]);
      pr.push_back(refs[k]);
    }
    CHECK(bleu_corpus_tokens(ph, pr).bleu == doctest::Approx(bleu_corpus_tokens(hyps, refs).bleu).epsilon(1e-12));
  }
}

TEST_CASE("sentence score") {
  CHECK(bleu_sentence("the cat sat", "the cat sat") == doctest::Approx(100.0));
  CHECK(bleu_sentence("anything", "") == 0.0);

  // 30 disjoint tokens against a 40-token reference.
  Tokens hyp, ref;
  for (int i = 0; i < 30; ++i) hyp.push_back("h" + std::to_string(i));
  for (int i = 0; i < 40; ++i) ref.push_back("r" + std::to_string(i));
  const double expected =
      100.0 * std::exp(1.0 - 40.0 / 30.0) * std::pow(1.0 / 31.0 * 1.0 / 30.0 * 1.0 / 29.0 * 1.0 / 28.0, 0.25);
  const double got = bleu_sentence(hyp, ref);
  CHECK(got == doctest::Approx(expected).epsilon(1e-12));
  CHECK(got > 0.0);
  CHECK(got < 5.0);
}

TEST_CASE("mismatched corpus sizes") {
  CHECK_THROWS_AS(bleu_corpus(std::vector<std::string>{"a"}, std::vector<std::string>{}), Error);
  CHECK_THROWS_AS(bleu_corpus_tokens(std::vector<Tokens>{{"a"}}, std::vector<Tokens>{{"a"}, {"b"}}), Error);
}
