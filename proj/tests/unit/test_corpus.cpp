#include <random>
#include <set>

#include "doctest.h"
#include "testkit.hpp"

#include "cyclemt/corpus.hpp"
#include "cyclemt/error.hpp"

using namespace cyclemt;

namespace {

SentencePair pair(const std::string& a, const std::string& b) {
  SentencePair p;
  p.src = tokenize(a, "fi");
  p.tgt = tokenize(b, "en");
  return p;
}

}  // namespace

TEST_CASE("tokenize detaches edge punctuation one character per token") {
  CHECK(tokenize("Hello, world!").tokens == testkit::words("Hello , world !"));
  CHECK(tokenize("2006-07").tokens == testkit::words("2006-07"));
  CHECK(tokenize("a  b").tokens == testkit::words("a b"));
  CHECK(tokenize("(it's \"fine\").").tokens == testkit::words("( it's \" fine \" ) ."));
  CHECK(tokenize("   ").tokens.empty());
  CHECK(tokenize("...").tokens == testkit::words(". . ."));
}

TEST_CASE("tokenize keeps raw text and language") {
  const auto s = tokenize("Hi there.", "en");
  CHECK(s.raw == "Hi there.");
  CHECK(s.lang == "en");
  CHECK(s.glue.size() == s.tokens.size());
}

TEST_CASE("detokenize of tokenize reproduces whitespace-normalized text") {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 3000; ++i) {
    const std::string text = testkit::fuzz_text(rng);
    const auto s = tokenize(text);
    INFO(text);
    CHECK(detokenize(s) == normalize_whitespace(text));
    if (!normalize_whitespace(text).empty()) CHECK_FALSE(s.tokens.empty());
  }
}

TEST_CASE("rule-based detokenize attaches punctuation") {
  CHECK(detokenize(testkit::words("Hello , world !")) == "Hello, world!");
  CHECK(detokenize(testkit::words("he said ( quietly ) .")) == "he said (quietly).");
  CHECK(detokenize(std::vector<std::string>{}).empty());
}

TEST_CASE("truecase examples") {
  const std::vector<Sentence> corpus{tokenize("the cat"), tokenize("The dog sat on the mat")};
  const auto model = train_truecaser(corpus);
  CHECK(apply_truecase(model, tokenize("The cat")).tokens == testkit::words("the cat"));
  // Never seen: untouched.
  CHECK(apply_truecase(model, tokenize("Zebra cat")).tokens[0] == "Zebra");

  const std::vector<Sentence> nasa{tokenize("NASA NASA")};
  const auto m2 = train_truecaser(nasa);
  CHECK(apply_truecase(m2, tokenize("NASA launched")).tokens[0] == "NASA");

  CHECK_THROWS_WITH_AS(train_truecaser(std::vector<Sentence>{}), "empty training corpus", Error);
}

TEST_CASE("truecase ties resolve to lower case") {
  const std::vector<Sentence> corpus{tokenize("x Apple"), tokenize("x apple")};
  const auto model = train_truecaser(corpus);
  CHECK(model.best_casing("APPLE") == "apple");
  CHECK(model.best_casing("pear").empty());
}

TEST_CASE("truecase then detruecase restores sentence-initial casing") {
  std::mt19937_64 rng(5);
  const std::vector<std::string> lower{"river", "stone", "bank", "paris", "nasa", "iphone", "day"};
  const std::vector<std::string> cased{"river", "stone", "bank", "Paris", "NASA", "iPhone", "day"};
  std::vector<Sentence> corpus;
  for (int i = 0; i < 200; ++i) {
    std::vector<std::string> toks{"Start"};
    for (int k = 0; k < 6; ++k) toks.push_back(cased[rng() % cased.size()]);
    corpus.push_back(make_sentence(toks));
  }
  const auto model = train_truecaser(corpus);
  for (std::size_t w = 0; w < lower.size(); ++w) {
    // Sentence starts as they appear in running text.
    const std::string first = cased[w] == lower[w] ? std::string(1, static_cast<char>(std::toupper(lower[w][0]))) + lower[w].substr(1)
                                                   : cased[w];
    const auto s = make_sentence({first, "stone", "."});
    const auto back = detruecase(model, apply_truecase(model, s));
    CHECK(back.tokens[0] == first);
  }
}

TEST_CASE("truecase model roundtrips through a file") {
  testkit::TempDir dir("truecase");
  const std::vector<Sentence> corpus{tokenize("a NASA b"), tokenize("c the d The")};
  const auto model = train_truecaser(corpus);
  model.save(dir.path() / "tc.txt");
  const auto loaded = TruecaseModel::load(dir.path() / "tc.txt");
  CHECK(loaded.counts() == model.counts());
}

TEST_CASE("dedup examples") {
  CHECK(dedup(std::vector{pair("a", "b"), pair("a", "b")}).size() == 1);
  CHECK(dedup(std::vector{pair("a", "b"), pair("a", "c")}).size() == 2);
  CHECK(dedup(std::vector{pair("a", "b"), pair("A", "b")}).size() == 2);
}

TEST_CASE("dedup is idempotent and keeps first occurrences in order") {
  std::mt19937_64 rng(3);
  for (int round = 0; round < 50; ++round) {
    std::vector<SentencePair> pairs;
    for (int i = 0; i < 40; ++i) {
      pairs.push_back(pair(std::string(1, static_cast<char>('a' + rng() % 4)),
                           std::string(1, static_cast<char>('a' + rng() % 3))));
    }
    const auto once = dedup(pairs);
    const auto twice = dedup(once);
    REQUIRE(once.size() == twice.size());
    std::set<std::pair<std::string, std::string>> seen;
    std::vector<std::pair<std::string, std::string>> expected;
    for (const auto& p : pairs) {
      if (seen.emplace(p.src.raw, p.tgt.raw).second) expected.emplace_back(p.src.raw, p.tgt.raw);
    }
    REQUIRE(once.size() == expected.size());
    for (std::size_t i = 0; i < once.size(); ++i) {
      CHECK(once[i].src.raw == expected[i].first);
      CHECK(once[i].tgt.raw == expected[i].second);
      CHECK(twice[i].src.raw == expected[i].first);
    }
  }
}

TEST_CASE("corpus files") {
  testkit::TempDir dir("corpus");
  testkit::write_file(dir.path() / "p.tsv", "Hei maailma.\tHello world.\nKissa\tCat\n");
  const auto tsv = read_parallel_tsv(dir.path() / "p.tsv", "fi", "en");
  REQUIRE(tsv.size() == 2);
  CHECK(tsv[0].src.tokens == testkit::words("Hei maailma ."));
  CHECK(tsv[0].tgt.lang == "en");

  testkit::write_file(dir.path() / "bad.tsv", "no tab here\n");
  CHECK_THROWS_AS(read_parallel_tsv(dir.path() / "bad.tsv", "fi", "en"), FormatError);

  auto pairs = tsv;
  pairs[1].origin = Origin::synthetic_cycle;
  pairs[1].scores["align_score"] = -0.25;
  write_scored_pairs(dir.path() / "s.jsonl", pairs);
  const auto back = read_scored_pairs(dir.path() / "s.jsonl");
  REQUIRE(back.size() == 2);
  CHECK(back[1].origin == Origin::synthetic_cycle);
  CHECK(back[1].scores.at("align_score") == -0.25);
  CHECK(back[0].src.tokens == pairs[0].src.tokens);

  CHECK(origin_from_string(to_string(Origin::synthetic_back)) == Origin::synthetic_back);
  CHECK_THROWS_AS(origin_from_string("bogus"), FormatError);
}
