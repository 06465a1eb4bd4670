#include "cyclemt/cipher.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "cyclemt/augment.hpp"
#include "cyclemt/corpus.hpp"
#include "cyclemt/error.hpp"
#include "utf8.hpp"

namespace cyclemt {

namespace {

constexpr const char* kDefinite[3] = {"lo", "la", "le"};
constexpr const char* kIndefinite[3] = {"un", "una", "une"};
constexpr const char* kAdjSuffix[3] = {"o", "a", "e"};
constexpr const char* kParticle[3] = {"ti", "ta", "te"};

class WordMaker {
 public:
  WordMaker() : used_{"se", "yksi", "ko", "vuonna", "in", "at"} {
    for (int c = 0; c < 3; ++c) {
      used_.insert(kDefinite[c]);
      used_.insert(kIndefinite[c]);
      used_.insert(kParticle[c]);
    }
  }

  std::string make(Rng& rng, std::string_view cons, std::string_view vowels, std::size_t syllables,
                   std::string_view tail_cons = {}) {
    for (;;) {
      std::string w;
      for (std::size_t s = 0; s < syllables; ++s) {
        w.push_back(cons[rng.below(cons.size())]);
        w.push_back(vowels[rng.below(vowels.size())]);
      }
      if (!tail_cons.empty()) w.push_back(tail_cons[rng.below(tail_cons.size())]);
      if (used_.insert(w).second) return w;
    }
  }

 private:
  std::set<std::string> used_;
};

struct Vocabulary {
  std::vector<std::string> src_nouns, tgt_nouns;
  std::vector<int> noun_class;
  std::vector<int> dialect_class;  // the wrong class used by noisy text
  std::vector<double> noun_cdf;     // Zipf over the noun index
  std::vector<std::string> src_adjs, tgt_adj_stems;
  std::vector<std::string> src_verbs, tgt_verbs;
};

Vocabulary make_vocabulary(const CipherOptions& o, Rng& rng) {
  WordMaker words;
  Vocabulary v;
  constexpr std::string_view kSrcCons = "kstlvnhjmpr";
  constexpr std::string_view kSrcVowels = "aeiouy";
  constexpr std::string_view kTgtCons = "bdgmnprstlfz";
  constexpr std::string_view kTgtVowels = "aeiou";
  for (std::size_t i = 0; i < o.nouns; ++i) {
    v.src_nouns.push_back(words.make(rng, kSrcCons, kSrcVowels, 2 + rng.below(2)));
    v.tgt_nouns.push_back(words.make(rng, kTgtCons, kTgtVowels, 2, kTgtCons));
  }
  // Each noun joins the class with the least Zipf mass so far, so the
  // classes cover about a third of all noun tokens each. Within a class the
  // dialect alternates between the two wrong classes.
  double mass[3] = {0.0, 0.0, 0.0};
  std::size_t members[3] = {0, 0, 0};
  double total = 0.0;
  for (std::size_t i = 0; i < o.nouns; ++i) {
    const double w = std::pow(static_cast<double>(i + 1), -o.noun_zipf);
    const int c = static_cast<int>(std::min_element(mass, mass + 3) - mass);
    mass[c] += w;
    v.noun_class.push_back(c);
    v.dialect_class.push_back((c + 1 + static_cast<int>(members[c]++ % 2)) % 3);
    total += w;
    v.noun_cdf.push_back(total);
  }
  for (auto& x : v.noun_cdf) x /= total;
  for (std::size_t i = 0; i < o.adjectives; ++i) {
    v.src_adjs.push_back(words.make(rng, kSrcCons, kSrcVowels, 2 + rng.below(2)));
    v.tgt_adj_stems.push_back(words.make(rng, kTgtCons, kTgtVowels, 2, kTgtCons));
  }
  for (std::size_t i = 0; i < o.verbs; ++i) {
    v.src_verbs.push_back(words.make(rng, kSrcCons, kSrcVowels, 3));
    v.tgt_verbs.push_back(words.make(rng, kTgtCons, kTgtVowels, 2) + "s");
  }
  return v;
}

struct Generated {
  std::vector<std::string> src;
  std::vector<std::string> tgt;
  std::vector<std::string> clean;  // tgt with every noun in its true class
};

std::string surface(const std::vector<std::string>& tokens) {
  // Words separated by spaces, final period attached, first letter upper.
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i > 0 && tokens[i] != ".") out.push_back(' ');
    out += tokens[i];
  }
  return utf8::capitalize(out);
}

enum class RangeStyle { hyphen, split };

/// Noisy sentences draw their nouns uniformly from [first, last); clean
/// ones follow the Zipf distribution.
struct TopicNouns {
  std::size_t first = 0;
  std::size_t last = 0;
};

std::size_t draw_noun(const Vocabulary& v, Rng& rng) {
  const double u = static_cast<double>(rng.below(std::uint64_t{1} << 53)) * 0x1p-53;
  const auto it = std::upper_bound(v.noun_cdf.begin(), v.noun_cdf.end(), u);
  return std::min(static_cast<std::size_t>(it - v.noun_cdf.begin()), v.noun_cdf.size() - 1);
}

Generated sentence(const Vocabulary& v, Rng& rng, TopicNouns topic, bool noisy, double number_rate,
                   RangeStyle style) {
  Generated g;
  auto noun_phrase = [&] {
    const bool definite = rng.below(2) == 0;
    const auto a = rng.below(v.src_adjs.size());
    const auto n = noisy ? topic.first + rng.below(topic.last - topic.first) : draw_noun(v, rng);
    g.src.insert(g.src.end(), {v.src_nouns[n], definite ? "se" : "yksi", v.src_adjs[a], "ko"});
    auto target = [&](std::vector<std::string>& out, int c) {
      out.insert(out.end(), {v.tgt_nouns[n], definite ? kDefinite[c] : kIndefinite[c],
                             v.tgt_adj_stems[a] + kAdjSuffix[c], kParticle[c]});
    };
    target(g.tgt, noisy ? v.dialect_class[n] : v.noun_class[n]);
    target(g.clean, v.noun_class[n]);
  };
  noun_phrase();
  const auto verb = rng.below(v.src_verbs.size());
  g.src.push_back(v.src_verbs[verb]);
  g.tgt.push_back(v.tgt_verbs[verb]);
  g.clean.push_back(v.tgt_verbs[verb]);
  noun_phrase();
  if (static_cast<double>(rng.below(1000000)) < number_rate * 1e6) {
    const auto year = 1950 + rng.below(70);
    char head[8], tail[8];
    std::snprintf(head, sizeof(head), "%u", static_cast<unsigned>(year));
    std::snprintf(tail, sizeof(tail), "%02u", static_cast<unsigned>((year + 1) % 100));
    const std::string range = std::string(head) + "-" + tail;
    g.src.insert(g.src.end(), {"vuonna", range});
    if (style == RangeStyle::split) {
      g.tgt.insert(g.tgt.end(), {"in", head, "at", tail});
    } else {
      g.tgt.insert(g.tgt.end(), {"in", range});
    }
    g.clean.insert(g.clean.end(), g.tgt.end() - (style == RangeStyle::split ? 4 : 2), g.tgt.end());
  }
  g.src.push_back(".");
  g.tgt.push_back(".");
  g.clean.push_back(".");
  return g;
}

bool chance(Rng& rng, double p) { return static_cast<double>(rng.below(1000000)) < p * 1e6; }

}  // namespace

CipherCorpus generate_cipher(const CipherOptions& o) {
  if (o.nouns == 0 || o.adjectives == 0 || o.verbs == 0) throw Error("cipher vocabulary must be non-empty");
  Rng rng(mix_seed(o.seed, 0));
  const Vocabulary v = make_vocabulary(o, rng);
  // Noisy text only talks about the nouns ranked [1%, 5%) by frequency.
  const TopicNouns topic{o.nouns / 100, std::max(o.nouns / 20, o.nouns / 100 + 1)};
  if (topic.last > o.nouns) throw Error("cipher needs at least 2 nouns");
  CipherCorpus c;

  for (std::size_t i = 0; i < o.parallel; ++i) {
    const auto style = chance(rng, o.parallel_split_ranges) ? RangeStyle::split : RangeStyle::hyphen;
    auto g = sentence(v, rng, topic, false, o.number_rate, style);
    if (chance(rng, o.parallel_short)) {
      const auto n = rng.below(v.src_nouns.size());
      g.src = {v.src_nouns[n], "."};
      g.tgt = {v.tgt_nouns[n], "."};
    } else if (chance(rng, o.parallel_illegal)) {
      g.src[2] += "\xEF\xBF\xBD";
    }
    c.train_src.push_back(surface(g.src));
    c.train_tgt.push_back(surface(g.tgt));
  }
  // Misaligned pairs: rotate the targets of a random subset.
  std::vector<std::size_t> picked;
  for (std::size_t i = 0; i < o.parallel; ++i) {
    if (chance(rng, o.parallel_misaligned)) picked.push_back(i);
  }
  if (picked.size() >= 2) {
    const std::string first = c.train_tgt[picked.front()];
    for (std::size_t k = 0; k + 1 < picked.size(); ++k) c.train_tgt[picked[k]] = c.train_tgt[picked[k + 1]];
    c.train_tgt[picked.back()] = first;
  }

  for (std::size_t i = 0; i < o.mono; ++i) {
    const bool noisy = chance(rng, o.mono_noise);
    const auto g = sentence(v, rng, topic, noisy, o.number_rate, RangeStyle::hyphen);
    c.mono_tgt.push_back(surface(g.tgt));
    c.mono_clean.push_back(surface(g.clean));
    c.mono_noisy.push_back(noisy);
  }
  for (std::size_t i = 0; i < o.dev; ++i) {
    const auto g = sentence(v, rng, topic, false, o.number_rate, RangeStyle::hyphen);
    c.dev_src.push_back(surface(g.src));
    c.dev_ref.push_back(surface(g.tgt));
  }
  for (std::size_t i = 0; i < o.test; ++i) {
    const auto g = sentence(v, rng, topic, false, o.number_rate, RangeStyle::hyphen);
    c.test_src.push_back(surface(g.src));
    c.test_ref.push_back(surface(g.tgt));
  }
  return c;
}

void write_cipher(const CipherCorpus& c, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_lines(dir / "train.src", c.train_src);
  write_lines(dir / "train.tgt", c.train_tgt);
  write_lines(dir / "mono.tgt", c.mono_tgt);
  std::vector<std::string> flags;
  for (const bool b : c.mono_noisy) flags.emplace_back(b ? "1" : "0");
  write_lines(dir / "mono.noisy", flags);
  write_lines(dir / "mono.clean", c.mono_clean);
  write_lines(dir / "dev.src", c.dev_src);
  write_lines(dir / "dev.ref", c.dev_ref);
  write_lines(dir / "test.src", c.test_src);
  write_lines(dir / "test.ref", c.test_ref);
}

}  // namespace cyclemt
