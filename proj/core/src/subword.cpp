#include "cyclemt/subword.hpp"

#include <fstream>
#include <map>
#include <set>
#include <tuple>

#include "cyclemt/error.hpp"
#include "utf8.hpp"

namespace cyclemt {

namespace {

constexpr std::string_view kMergeFileHeader = "#version: cyclemt-bpe 1";

std::string pair_key(const std::string& left, const std::string& right) {
  std::string key;
  key.reserve(left.size() + right.size() + 1);
  key.append(left);
  key.push_back('\x1f');
  key.append(right);
  return key;
}

bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

}  // namespace

BpeModel::BpeModel(std::vector<Merge> merges, std::string marker)
    : merges_(std::move(merges)), marker_(std::move(marker)) {
  for (std::size_t i = 0; i < merges_.size(); ++i) {
    const auto [it, inserted] =
        ranks_.emplace(pair_key(merges_[i].first, merges_[i].second), static_cast<long>(i));
    if (!inserted) {
      throw FormatError("duplicate merge '" + merges_[i].first + " " + merges_[i].second + "'");
    }
  }
}

long BpeModel::rank(const std::string& left, const std::string& right) const {
  const auto it = ranks_.find(pair_key(left, right));
  return it == ranks_.end() ? -1 : it->second;
}

std::vector<std::string> BpeModel::segment(const std::string& word) const {
  std::vector<std::string> symbols = utf8::split_chars(word);
  if (symbols.empty()) return symbols;
  while (symbols.size() > 1) {
    long best = -1;
    for (std::size_t i = 0; i + 1 < symbols.size(); ++i) {
      const long r = rank(symbols[i], symbols[i + 1]);
      if (r >= 0 && (best < 0 || r < best)) best = r;
    }
    if (best < 0) break;
    const auto& [left, right] = merges_[static_cast<std::size_t>(best)];
    std::vector<std::string> merged;
    merged.reserve(symbols.size());
    for (std::size_t i = 0; i < symbols.size(); ++i) {
      if (i + 1 < symbols.size() && symbols[i] == left && symbols[i + 1] == right) {
        merged.push_back(left + right);
        ++i;
      } else {
        merged.push_back(std::move(symbols[i]));
      }
    }
    symbols = std::move(merged);
  }
  // A final piece ending in the marker would be read back as a continuation;
  // peel its last character into a piece of its own.
  if (ends_with(symbols.back(), marker_)) {
    auto chars = utf8::split_chars(symbols.back());
    if (chars.size() > 1) {
      std::string tail = std::move(chars.back());
      chars.pop_back();
      std::string head;
      for (const auto& c : chars) head += c;
      symbols.back() = std::move(head);
      symbols.push_back(std::move(tail));
    }
  }
  for (std::size_t i = 0; i + 1 < symbols.size(); ++i) symbols[i] += marker_;
  return symbols;
}

void BpeModel::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << kMergeFileHeader << '\n';
  for (const auto& [left, right] : merges_) out << left << ' ' << right << '\n';
}

BpeModel BpeModel::load(const std::filesystem::path& path) {
  const auto lines = read_lines(path);
  if (lines.empty() || lines[0].rfind("#version", 0) != 0) {
    throw FormatError(path.string() + ": missing version comment");
  }
  std::vector<Merge> merges;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto space = lines[i].find(' ');
    if (space == std::string::npos || lines[i].find(' ', space + 1) != std::string::npos) {
      throw FormatError(path.string() + ":" + std::to_string(i + 1) + ": expected 'left right'");
    }
    merges.emplace_back(lines[i].substr(0, space), lines[i].substr(space + 1));
  }
  return BpeModel(std::move(merges));
}

BpeModel bpe_learn(std::span<const Sentence> corpus, std::size_t num_operations) {
  if (corpus.empty()) throw Error("empty training corpus");

  std::map<std::string, long> word_freq;
  for (const auto& s : corpus) {
    for (const auto& tok : s.tokens) ++word_freq[tok];
  }
  std::vector<std::vector<std::string>> words;
  std::vector<long> freqs;
  for (const auto& [word, freq] : word_freq) {
    words.push_back(utf8::split_chars(word));
    freqs.push_back(freq);
  }

  using Pair = std::pair<std::string, std::string>;
  std::map<Pair, long> pair_counts;
  std::map<Pair, std::set<std::size_t>> where;
  // Ordered by (-count, left, right): begin() is the next merge.
  std::set<std::tuple<long, std::string, std::string>> queue;

  auto adjust = [&](const Pair& p, long delta) {
    long& c = pair_counts[p];
    if (c > 0) queue.erase({-c, p.first, p.second});
    c += delta;
    if (c > 0) queue.insert({-c, p.first, p.second});
  };
  auto add_word = [&](std::size_t w, long sign) {
    const auto& syms = words[w];
    for (std::size_t i = 0; i + 1 < syms.size(); ++i) {
      Pair p{syms[i], syms[i + 1]};
      if (sign > 0) where[p].insert(w);
      adjust(p, sign * freqs[w]);
    }
  };
  for (std::size_t w = 0; w < words.size(); ++w) add_word(w, +1);

  std::vector<BpeModel::Merge> merges;
  while (merges.size() < num_operations && !queue.empty()) {
    const auto [neg_count, left, right] = *queue.begin();
    if (-neg_count < 2) break;
    merges.emplace_back(left, right);
    const Pair best{left, right};
    const std::set<std::size_t> affected = where[best];
    for (const std::size_t w : affected) {
      add_word(w, -1);
      auto& syms = words[w];
      std::vector<std::string> merged;
      merged.reserve(syms.size());
      for (std::size_t i = 0; i < syms.size(); ++i) {
        if (i + 1 < syms.size() && syms[i] == left && syms[i + 1] == right) {
          merged.push_back(left + right);
          ++i;
        } else {
          merged.push_back(std::move(syms[i]));
        }
      }
      syms = std::move(merged);
      add_word(w, +1);
    }
    where.erase(best);
  }
  return BpeModel(std::move(merges));
}

Sentence bpe_apply(const BpeModel& model, const Sentence& sentence) {
  Sentence out;
  out.raw = sentence.raw;
  out.lang = sentence.lang;
  const bool has_glue = sentence.glue.size() == sentence.tokens.size();
  for (std::size_t i = 0; i < sentence.tokens.size(); ++i) {
    auto pieces = model.segment(sentence.tokens[i]);
    for (std::size_t k = 0; k < pieces.size(); ++k) {
      out.tokens.push_back(std::move(pieces[k]));
      if (has_glue) out.glue.push_back(k == 0 ? sentence.glue[i] : true);
    }
  }
  return out;
}

BpeReverseResult bpe_reverse(const Sentence& sentence, std::string_view marker) {
  BpeReverseResult result;
  Sentence& out = result.sentence;
  out.raw = sentence.raw;
  out.lang = sentence.lang;
  const bool has_glue = sentence.glue.size() == sentence.tokens.size();
  std::string buffer;
  bool open = false;
  bool word_glue = false;
  for (std::size_t i = 0; i < sentence.tokens.size(); ++i) {
    const std::string& tok = sentence.tokens[i];
    if (!open) {
      word_glue = has_glue && sentence.glue[i];
      open = true;
    }
    if (ends_with(tok, marker)) {
      buffer.append(tok, 0, tok.size() - marker.size());
      continue;
    }
    buffer.append(tok);
    out.tokens.push_back(std::move(buffer));
    if (has_glue) out.glue.push_back(word_glue);
    buffer.clear();
    open = false;
  }
  if (open) {
    result.dangling_marker = true;
    if (!buffer.empty()) {
      out.tokens.push_back(std::move(buffer));
      if (has_glue) out.glue.push_back(word_glue);
    }
  }
  return result;
}

}  // namespace cyclemt
