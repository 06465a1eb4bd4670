#include "cyclemt/ngram_lm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include "cyclemt/error.hpp"
#include "numfmt.hpp"

namespace cyclemt {

namespace {

constexpr std::string_view kHeader = "#cyclemt-ngram-lm v1";

void validate(const LmOptions& options) {
  if (options.order < 1) throw Error("LM order must be >= 1");
  if (!(options.k > 0.0) || !std::isfinite(options.k)) throw Error("LM smoothing k must be > 0");
  const auto& l = options.lambdas;
  if (l.size() != static_cast<std::size_t>(options.order)) {
    throw Error("invalid lambdas: expected " + std::to_string(options.order) + " weights");
  }
  double sum = 0.0;
  for (double x : l) {
    if (!(x >= 0.0) || !std::isfinite(x)) throw Error("invalid lambdas: negative weight");
    sum += x;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw Error("invalid lambdas: weights must sum to 1");
}

}  // namespace

std::vector<double> default_lambdas(int order) {
  std::vector<double> l(static_cast<std::size_t>(std::max(order, 0)));
  const double total = order * (order + 1) / 2.0;
  for (int i = 0; i < order; ++i) l[static_cast<std::size_t>(i)] = (i + 1) / total;
  return l;
}

NgramLm NgramLm::train(std::span<const Sentence> corpus, const LmOptions& options) {
  std::vector<std::vector<std::string>> tokens;
  tokens.reserve(corpus.size());
  for (const auto& s : corpus) tokens.push_back(s.tokens);
  return train(tokens, options);
}

NgramLm NgramLm::train(std::span<const std::vector<std::string>> corpus,
                       const LmOptions& options) {
  if (corpus.empty()) throw Error("empty training corpus");
  LmOptions opts = options;
  if (opts.lambdas.empty()) opts.lambdas = default_lambdas(opts.order);
  validate(opts);

  NgramLm lm;
  lm.order_ = opts.order;
  lm.k_ = opts.k;
  lm.lambdas_ = opts.lambdas;

  std::set<std::string> vocab;
  for (const auto& s : corpus) vocab.insert(s.begin(), s.end());
  lm.words_ = {"<unk>", "<s>", "</s>"};
  for (const auto& w : vocab) {
    if (w == "<unk>" || w == "<s>" || w == "</s>") continue;
    lm.words_.push_back(w);
  }
  for (std::size_t i = 0; i < lm.words_.size(); ++i) {
    lm.ids_.emplace(lm.words_[i], static_cast<WordId>(i));
  }

  lm.ngrams_.assign(static_cast<std::size_t>(lm.order_), {});
  const std::size_t pad = static_cast<std::size_t>(lm.order_ - 1);
  Key seq;
  for (const auto& s : corpus) {
    seq.assign(pad, kBos);
    for (const auto& w : s) seq.push_back(static_cast<char32_t>(lm.id(w)));
    seq.push_back(kEos);
    for (std::size_t pos = pad; pos < seq.size(); ++pos) {
      for (std::size_t j = 1; j <= static_cast<std::size_t>(lm.order_); ++j) {
        ++lm.ngrams_[j - 1][seq.substr(pos + 1 - j, j)];
      }
    }
  }
  lm.index_contexts();
  return lm;
}

void NgramLm::index_contexts() {
  contexts_.assign(ngrams_.size(), {});
  for (std::size_t j = 0; j < ngrams_.size(); ++j) {
    for (const auto& [key, count] : ngrams_[j]) contexts_[j][key.substr(0, j)] += count;
  }
}

NgramLm::WordId NgramLm::id(std::string_view word) const {
  const auto it = ids_.find(std::string(word));
  if (it == ids_.end() || it->second == kBos) return kUnk;
  return it->second;
}

NgramLm::State NgramLm::initial_state() const {
  return State(static_cast<std::size_t>(order_ - 1), kBos);
}

double NgramLm::prob(std::u32string_view history, WordId w) const {
  const double v = static_cast<double>(vocab_size());
  double p = 0.0;
  Key key;
  for (std::size_t j = 1; j <= static_cast<std::size_t>(order_); ++j) {
    const std::size_t ctx_len = j - 1;
    key.clear();
    for (std::size_t i = 0; i < ctx_len; ++i) {
      // Histories shorter than the context are padded with <s>.
      const std::size_t back = ctx_len - i;
      key.push_back(back <= history.size() ? history[history.size() - back] : kBos);
    }
    const auto ctx_it = contexts_[j - 1].find(key);
    const double ctx_count = ctx_it == contexts_[j - 1].end() ? 0.0
                                                              : static_cast<double>(ctx_it->second);
    key.push_back(static_cast<char32_t>(w));
    const auto ng_it = ngrams_[j - 1].find(key);
    const double count = ng_it == ngrams_[j - 1].end() ? 0.0 : static_cast<double>(ng_it->second);
    p += lambdas_[j - 1] * (count + k_) / (ctx_count + k_ * v);
  }
  return p;
}

double NgramLm::score(State& state, WordId w) const {
  const double lp = std::log(prob(state, w));
  if (!state.empty()) {
    state.erase(0, 1);
    state.push_back(static_cast<char32_t>(w));
  }
  return lp;
}

double NgramLm::logprob(std::span<const std::string> tokens) const {
  State state = initial_state();
  double total = 0.0;
  for (const auto& t : tokens) total += score(state, id(t));
  total += score(state, kEos);
  return total;
}

double NgramLm::per_token_logprob(std::span<const std::string> tokens) const {
  return logprob(tokens) / static_cast<double>(tokens.size() + 1);
}

double NgramLm::perplexity(std::span<const Sentence> corpus) const {
  if (corpus.empty()) throw Error("empty corpus");
  double total = 0.0;
  double n = 0.0;
  for (const auto& s : corpus) {
    total += logprob(s.tokens);
    n += static_cast<double>(s.tokens.size() + 1);
  }
  return std::exp(-total / n);
}

void NgramLm::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << kHeader << '\n';
  out << "order " << order_ << '\n';
  out << "k " << numfmt::format(k_) << '\n';
  out << "lambdas";
  for (double l : lambdas_) out << ' ' << numfmt::format(l);
  out << '\n';
  out << "vocab " << words_.size() - 3 << '\n';
  out << "\\vocab\n";
  for (std::size_t i = 3; i < words_.size(); ++i) out << words_[i] << '\n';
  out << "\\ngrams\n";
  for (std::size_t j = 0; j < ngrams_.size(); ++j) {
    std::map<Key, std::uint64_t> sorted(ngrams_[j].begin(), ngrams_[j].end());
    for (const auto& [key, count] : sorted) {
      for (std::size_t i = 0; i < key.size(); ++i) {
        if (i > 0) out << ' ';
        out << words_[key[i]];
      }
      out << '\t' << count << '\n';
    }
  }
}

NgramLm NgramLm::load(const std::filesystem::path& path) {
  const auto lines = read_lines(path);
  auto fail = [&](std::size_t line, const std::string& what) {
    return FormatError(path.string() + ":" + std::to_string(line + 1) + ": " + what);
  };
  if (lines.size() < 6 || lines[0] != kHeader) throw fail(0, "not an n-gram model file");

  NgramLm lm;
  LmOptions opts;
  std::size_t vocab_count = 0;
  std::size_t i = 1;
  for (; i < lines.size() && lines[i] != "\\vocab"; ++i) {
    const Sentence f = from_tokenized(lines[i]);
    if (f.tokens.empty()) continue;
    const auto& name = f.tokens[0];
    if (name == "order" && f.tokens.size() == 2) {
      opts.order = std::stoi(f.tokens[1]);
    } else if (name == "k" && f.tokens.size() == 2) {
      opts.k = numfmt::parse(f.tokens[1]);
    } else if (name == "lambdas") {
      for (std::size_t t = 1; t < f.tokens.size(); ++t) opts.lambdas.push_back(numfmt::parse(f.tokens[t]));
    } else if (name == "vocab" && f.tokens.size() == 2) {
      vocab_count = std::stoull(f.tokens[1]);
    } else {
      throw fail(i, "unknown header field '" + name + "'");
    }
  }
  validate(opts);
  lm.order_ = opts.order;
  lm.k_ = opts.k;
  lm.lambdas_ = opts.lambdas;
  lm.words_ = {"<unk>", "<s>", "</s>"};
  ++i;
  for (; i < lines.size() && lines[i] != "\\ngrams"; ++i) lm.words_.push_back(lines[i]);
  if (lm.words_.size() - 3 != vocab_count) throw fail(i, "vocab size mismatch");
  for (std::size_t w = 0; w < lm.words_.size(); ++w) {
    lm.ids_.emplace(lm.words_[w], static_cast<WordId>(w));
  }
  lm.ngrams_.assign(static_cast<std::size_t>(lm.order_), {});
  ++i;
  for (; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto tab = lines[i].find('\t');
    if (tab == std::string::npos) throw fail(i, "missing count");
    const Sentence words = from_tokenized(std::string_view(lines[i]).substr(0, tab));
    if (words.tokens.empty() || words.tokens.size() > static_cast<std::size_t>(lm.order_)) {
      throw fail(i, "bad n-gram length");
    }
    Key key;
    for (const auto& w : words.tokens) {
      const auto it = lm.ids_.find(w);
      if (it == lm.ids_.end()) throw fail(i, "unknown word '" + w + "'");
      key.push_back(static_cast<char32_t>(it->second));
    }
    lm.ngrams_[key.size() - 1][key] = std::stoull(lines[i].substr(tab + 1));
  }
  lm.index_contexts();
  return lm;
}

}  // namespace cyclemt
