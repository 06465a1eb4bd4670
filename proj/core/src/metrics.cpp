#include "cyclemt/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "cyclemt/corpus.hpp"
#include "cyclemt/error.hpp"

namespace cyclemt {

namespace {

using NgramCounts = std::unordered_map<std::string, std::size_t>;

NgramCounts count_ngrams(std::span<const std::string> tokens, std::size_t n) {
  NgramCounts counts;
  if (tokens.size() < n) return counts;
  std::string key;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    key.clear();
    for (std::size_t k = 0; k < n; ++k) {
      if (k > 0) key.push_back('\x1f');
      key.append(tokens[i + k]);
    }
    ++counts[key];
  }
  return counts;
}

double brevity_penalty(std::size_t hyp_len, std::size_t ref_len) {
  if (hyp_len == 0) return 0.0;
  return std::exp(std::min(0.0, 1.0 - static_cast<double>(ref_len) / static_cast<double>(hyp_len)));
}

}  // namespace

BleuStats& BleuStats::operator+=(const BleuStats& other) {
  for (std::size_t n = 0; n < 4; ++n) {
    matches[n] += other.matches[n];
    totals[n] += other.totals[n];
  }
  hyp_len += other.hyp_len;
  ref_len += other.ref_len;
  return *this;
}

BleuStats bleu_stats(std::span<const std::string> hyp, std::span<const std::string> ref) {
  BleuStats s;
  s.hyp_len = hyp.size();
  s.ref_len = ref.size();
  for (std::size_t n = 1; n <= 4; ++n) {
    const auto h = count_ngrams(hyp, n);
    const auto r = count_ngrams(ref, n);
    std::size_t matched = 0;
    for (const auto& [g, c] : h) {
      const auto it = r.find(g);
      if (it != r.end()) matched += std::min(c, it->second);
    }
    s.matches[n - 1] = matched;
    s.totals[n - 1] = hyp.size() >= n ? hyp.size() - n + 1 : 0;
  }
  return s;
}

BleuResult bleu_from_stats(const BleuStats& stats) {
  BleuResult r;
  r.hyp_len = stats.hyp_len;
  r.ref_len = stats.ref_len;
  r.bp = brevity_penalty(stats.hyp_len, stats.ref_len);
  double log_sum = 0.0;
  bool zero = false;
  for (std::size_t n = 0; n < 4; ++n) {
    r.precisions[n] = stats.totals[n] == 0 ? 0.0
                                           : static_cast<double>(stats.matches[n]) /
                                                 static_cast<double>(stats.totals[n]);
    if (stats.matches[n] == 0) {
      zero = true;
    } else {
      log_sum += std::log(r.precisions[n]);
    }
  }
  r.bleu = zero ? 0.0 : 100.0 * r.bp * std::exp(log_sum / 4.0);
  return r;
}

BleuResult bleu_corpus_tokens(std::span<const std::vector<std::string>> hyps,
                              std::span<const std::vector<std::string>> refs) {
  if (hyps.size() != refs.size()) {
    throw Error("hypothesis count " + std::to_string(hyps.size()) + " != reference count " +
                std::to_string(refs.size()));
  }
  BleuStats total;
  for (std::size_t i = 0; i < hyps.size(); ++i) total += bleu_stats(hyps[i], refs[i]);
  return bleu_from_stats(total);
}

BleuResult bleu_corpus(std::span<const std::string> hyps, std::span<const std::string> refs) {
  if (hyps.size() != refs.size()) {
    throw Error("hypothesis count " + std::to_string(hyps.size()) + " != reference count " +
                std::to_string(refs.size()));
  }
  std::vector<std::vector<std::string>> h, r;
  h.reserve(hyps.size());
  r.reserve(refs.size());
  for (std::size_t i = 0; i < hyps.size(); ++i) {
    h.push_back(tokenize(hyps[i]).tokens);
    r.push_back(tokenize(refs[i]).tokens);
  }
  return bleu_corpus_tokens(h, r);
}

double bleu_sentence(std::span<const std::string> hyp, std::span<const std::string> ref) {
  if (ref.empty() || hyp.empty()) return 0.0;
  const BleuStats s = bleu_stats(hyp, ref);
  double log_sum = 0.0;
  for (std::size_t n = 0; n < 4; ++n) {
    log_sum += std::log(static_cast<double>(s.matches[n] + 1) / static_cast<double>(s.totals[n] + 1));
  }
  return 100.0 * brevity_penalty(s.hyp_len, s.ref_len) * std::exp(log_sum / 4.0);
}

double bleu_sentence(const std::string& hyp, const std::string& ref) {
  return bleu_sentence(tokenize(hyp).tokens, tokenize(ref).tokens);
}

}  // namespace cyclemt
