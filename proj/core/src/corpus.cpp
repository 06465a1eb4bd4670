#include "cyclemt/corpus.hpp"

#include <fstream>
#include <set>
#include <unordered_set>

#include "json.hpp"

#include "cyclemt/error.hpp"
#include "utf8.hpp"

namespace cyclemt {

namespace {

bool is_closing(std::string_view tok) {
  static const std::set<std::string_view> kClosing = {
      ".", ",", "!", "?", ";", ":", ")", "]", "}", "%", "…", "»", "”", "’"};
  return kClosing.count(tok) > 0;
}

bool is_opening(std::string_view tok) {
  static const std::set<std::string_view> kOpening = {"(", "[", "{", "«", "“", "‘",
                                                      "¿", "¡"};
  return kOpening.count(tok) > 0;
}

}  // namespace

std::string_view to_string(Origin origin) {
  switch (origin) {
    case Origin::parallel:
      return "parallel";
    case Origin::synthetic_back:
      return "synthetic-back";
    case Origin::synthetic_cycle:
      return "synthetic-cycle";
  }
  return "parallel";
}

Origin origin_from_string(std::string_view name) {
  if (name == "parallel") return Origin::parallel;
  if (name == "synthetic-back") return Origin::synthetic_back;
  if (name == "synthetic-cycle") return Origin::synthetic_cycle;
  throw FormatError("unknown origin '" + std::string(name) + "'");
}

Sentence make_sentence(std::vector<std::string> tokens, std::string lang) {
  Sentence s;
  s.raw = join(tokens);
  s.tokens = std::move(tokens);
  s.lang = std::move(lang);
  return s;
}

Sentence from_tokenized(std::string_view line, std::string lang) {
  Sentence s;
  s.raw = std::string(line);
  s.lang = std::move(lang);
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && utf8::is_ascii_space(line[i])) ++i;
    const std::size_t start = i;
    while (i < line.size() && !utf8::is_ascii_space(line[i])) ++i;
    if (i > start) s.tokens.emplace_back(line.substr(start, i - start));
  }
  return s;
}

std::string join(std::span<const std::string> tokens, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i > 0) out.append(sep);
    out.append(tokens[i]);
  }
  return out;
}

Sentence tokenize(std::string_view text, std::string_view lang) {
  Sentence s;
  s.raw = std::string(text);
  s.lang = std::string(lang);
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && utf8::is_ascii_space(text[i])) ++i;
    const std::size_t start = i;
    while (i < text.size() && !utf8::is_ascii_space(text[i])) ++i;
    if (i == start) break;
    const std::string_view chunk = text.substr(start, i - start);
    const auto cps = utf8::decode(chunk);

    std::size_t first = cps.size();
    std::size_t last = 0;
    for (std::size_t k = 0; k < cps.size(); ++k) {
      if (!(cps[k].valid && utf8::is_punct(cps[k].value))) {
        first = std::min(first, k);
        last = k;
      }
    }
    bool glued = false;
    auto push = [&](std::string_view tok) {
      s.tokens.emplace_back(tok);
      s.glue.push_back(glued);
      glued = true;
    };
    if (first == cps.size()) {
      for (const auto& cp : cps) push(chunk.substr(cp.offset, cp.length));
      continue;
    }
    for (std::size_t k = 0; k < first; ++k) push(chunk.substr(cps[k].offset, cps[k].length));
    const std::size_t core_begin = cps[first].offset;
    const std::size_t core_end = cps[last].offset + cps[last].length;
    push(chunk.substr(core_begin, core_end - core_begin));
    for (std::size_t k = last + 1; k < cps.size(); ++k) {
      push(chunk.substr(cps[k].offset, cps[k].length));
    }
  }
  return s;
}

std::string detokenize(const Sentence& sentence) {
  if (sentence.glue.size() != sentence.tokens.size()) return detokenize(sentence.tokens);
  std::string out;
  for (std::size_t i = 0; i < sentence.tokens.size(); ++i) {
    if (i > 0 && !sentence.glue[i]) out.push_back(' ');
    out.append(sentence.tokens[i]);
  }
  return out;
}

std::string detokenize(std::span<const std::string> tokens) {
  std::string out;
  bool attach_next = true;
  bool quote_open = false;
  for (const auto& tok : tokens) {
    bool attach = attach_next;
    attach_next = false;
    if (tok == "\"") {
      if (quote_open) {
        attach = true;
      } else {
        attach_next = true;
      }
      quote_open = !quote_open;
    } else if (is_closing(tok)) {
      attach = true;
    } else if (is_opening(tok)) {
      attach_next = true;
    }
    if (!out.empty() && !attach) out.push_back(' ');
    out.append(tok);
  }
  return out;
}

std::string normalize_whitespace(std::string_view text) {
  std::string out;
  bool pending_space = false;
  for (char c : text) {
    if (utf8::is_ascii_space(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(c);
  }
  return out;
}

// --- truecasing ----------------------------------------------------------

std::string TruecaseModel::best_casing(std::string_view token) const {
  const auto it = counts_.find(utf8::lower(token));
  if (it == counts_.end()) return {};
  const std::string& lower = it->first;
  std::string best;
  std::size_t best_count = 0;
  for (const auto& [surface, count] : it->second) {
    if (count > best_count) {
      best = surface;
      best_count = count;
    } else if (count == best_count && surface == lower) {
      best = surface;
    }
  }
  return best;
}

void TruecaseModel::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  std::map<std::string, std::map<std::string, std::size_t>> sorted(counts_.begin(), counts_.end());
  out << "#cyclemt-truecase v1\n";
  for (const auto& [lower, casings] : sorted) {
    for (const auto& [surface, count] : casings) out << lower << ' ' << surface << ' ' << count << '\n';
  }
}

TruecaseModel TruecaseModel::load(const std::filesystem::path& path) {
  CasingCounts counts;
  for (const auto& line : read_lines(path)) {
    if (line.empty() || line[0] == '#') continue;
    const Sentence fields = from_tokenized(line);
    if (fields.tokens.size() != 3) throw FormatError("bad truecase record: " + line);
    counts[fields.tokens[0]][fields.tokens[1]] = std::stoull(fields.tokens[2]);
  }
  return TruecaseModel(std::move(counts));
}

TruecaseModel train_truecaser(std::span<const Sentence> corpus) {
  if (corpus.empty()) throw Error("empty training corpus");
  TruecaseModel::CasingCounts counts;
  for (const auto& s : corpus) {
    for (std::size_t i = 1; i < s.tokens.size(); ++i) {
      ++counts[utf8::lower(s.tokens[i])][s.tokens[i]];
    }
  }
  return TruecaseModel(std::move(counts));
}

Sentence apply_truecase(const TruecaseModel& model, const Sentence& sentence) {
  Sentence out = sentence;
  if (out.tokens.empty()) return out;
  const std::string best = model.best_casing(out.tokens[0]);
  if (!best.empty() && best == utf8::lower(best)) out.tokens[0] = best;
  return out;
}

Sentence detruecase(const TruecaseModel& model, const Sentence& sentence) {
  Sentence out = sentence;
  for (auto& tok : out.tokens) {
    const auto cps = utf8::decode(tok);
    if (cps.empty() || (cps[0].valid && utf8::is_punct(cps[0].value))) continue;
    if (!cps[0].valid || !utf8::is_letter(cps[0].value)) break;
    const std::string best = model.best_casing(tok);
    const bool mixed_lower_initial =
        !best.empty() && best != utf8::lower(best) && utf8::capitalize(best) != best;
    if (!mixed_lower_initial) tok = utf8::capitalize(tok);
    break;
  }
  return out;
}

std::vector<SentencePair> dedup(std::span<const SentencePair> pairs) {
  struct PairHash {
    std::size_t operator()(const std::pair<std::string, std::string>& p) const {
      const std::size_t h = std::hash<std::string>{}(p.first);
      return h ^ (std::hash<std::string>{}(p.second) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2));
    }
  };
  std::unordered_set<std::pair<std::string, std::string>, PairHash> seen;
  std::vector<SentencePair> out;
  for (const auto& p : pairs) {
    if (seen.emplace(p.src.raw, p.tgt.raw).second) out.push_back(p);
  }
  return out;
}

// --- files ---------------------------------------------------------------

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  return lines;
}

void write_lines(const std::filesystem::path& path, std::span<const std::string> lines) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  for (const auto& line : lines) out << line << '\n';
}

std::vector<Sentence> read_tokenized(const std::filesystem::path& path, std::string_view lang) {
  std::vector<Sentence> out;
  for (const auto& line : read_lines(path)) out.push_back(from_tokenized(line, std::string(lang)));
  return out;
}

void write_tokenized(const std::filesystem::path& path, std::span<const Sentence> sentences) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  for (const auto& s : sentences) out << join(s.tokens) << '\n';
}

std::vector<SentencePair> read_parallel(const std::filesystem::path& src,
                                        const std::filesystem::path& tgt,
                                        std::string_view src_lang, std::string_view tgt_lang) {
  const auto src_lines = read_lines(src);
  const auto tgt_lines = read_lines(tgt);
  if (src_lines.size() != tgt_lines.size()) {
    throw FormatError("parallel files differ in line count: " + src.string() + " vs " +
                      tgt.string());
  }
  std::vector<SentencePair> out(src_lines.size());
  for (std::size_t i = 0; i < src_lines.size(); ++i) {
    out[i].src = tokenize(src_lines[i], src_lang);
    out[i].tgt = tokenize(tgt_lines[i], tgt_lang);
  }
  return out;
}

std::vector<SentencePair> read_parallel_tsv(const std::filesystem::path& path,
                                            std::string_view src_lang,
                                            std::string_view tgt_lang) {
  std::vector<SentencePair> out;
  std::size_t line_no = 0;
  for (const auto& line : read_lines(path)) {
    ++line_no;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": missing TAB");
    }
    SentencePair p;
    p.src = tokenize(std::string_view(line).substr(0, tab), src_lang);
    p.tgt = tokenize(std::string_view(line).substr(tab + 1), tgt_lang);
    out.push_back(std::move(p));
  }
  return out;
}

void write_scored_pairs(const std::filesystem::path& path, std::span<const SentencePair> pairs) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  for (const auto& p : pairs) {
    nlohmann::ordered_json j;
    j["src"] = join(p.src.tokens);
    j["tgt"] = join(p.tgt.tokens);
    j["origin"] = std::string(to_string(p.origin));
    j["scores"] = nlohmann::ordered_json::object();
    for (const auto& [name, value] : p.scores) j["scores"][name] = value;
    if (!p.src.lang.empty()) j["src_lang"] = p.src.lang;
    if (!p.tgt.lang.empty()) j["tgt_lang"] = p.tgt.lang;
    out << j.dump() << '\n';
  }
}

std::vector<SentencePair> read_scored_pairs(const std::filesystem::path& path) {
  std::vector<SentencePair> out;
  std::size_t line_no = 0;
  for (const auto& line : read_lines(path)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      SentencePair p;
      p.src = from_tokenized(j.at("src").get<std::string>(), j.value("src_lang", std::string{}));
      p.tgt = from_tokenized(j.at("tgt").get<std::string>(), j.value("tgt_lang", std::string{}));
      p.origin = origin_from_string(j.value("origin", std::string("parallel")));
      if (j.contains("scores")) {
        for (const auto& [name, value] : j["scores"].items()) p.scores[name] = value.get<double>();
      }
      out.push_back(std::move(p));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace cyclemt
