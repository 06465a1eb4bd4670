#include "cyclemt/toymt.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "json.hpp"

#include "cyclemt/error.hpp"
#include "numfmt.hpp"

namespace cyclemt {

namespace {

double attach_prob(const LexiconTable& lex, const std::string& f, const std::string& e) {
  return lex.knows_source(f) ? lex.prob(e, f) : (e == f ? 1.0 : 0.0);
}

/// Output position i attaches to input position i; positions past the end
/// of the input attach to their best input token.
double lex_logprob(const LexiconTable& lex, std::span<const std::string> source, std::size_t i,
                   const std::string& e) {
  double p = 0.0;
  if (i < source.size()) {
    p = attach_prob(lex, source[i], e);
  } else {
    for (const auto& f : source) p = std::max(p, attach_prob(lex, f, e));
  }
  return std::log(std::max(p, kOovFloor));
}

double combine(const ModelWeights& w, double lex, double lm, double len) {
  return w.lex * lex + w.lm * lm + w.len * len;
}

struct Partial {
  std::vector<std::string> tokens;  // generation order
  NgramLm::State state;
  double lex = 0.0;
  double lm = 0.0;
  double score = 0.0;
};

bool better(const Partial& a, const Partial& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.tokens < b.tokens;
}

bool better_hyp(const Hypothesis& a, const Hypothesis& b) {
  if (a.logscore != b.logscore) return a.logscore > b.logscore;
  return a.tokens < b.tokens;
}

std::string_view direction_name(Direction d) { return d == Direction::s2t ? "s2t" : "t2s"; }
std::string_view orientation_name(Orientation o) { return o == Orientation::l2r ? "l2r" : "r2l"; }

}  // namespace

TranslatorSpec toy_train(std::span<const SentencePair> pairs, const ToyTrainOptions& options) {
  if (pairs.empty()) throw Error("empty training corpus");
  std::vector<SentencePair> oriented;
  if (options.direction == Direction::t2s) {
    oriented = swap_sides(pairs);
  } else {
    oriented.assign(pairs.begin(), pairs.end());
  }
  const auto m1 = ibm1_train(oriented, std::max<std::size_t>(options.ibm1_iters, 1));
  auto m2 = ibm2_train(oriented, options.ibm2_iters, m1.lexicon);

  std::vector<std::vector<std::string>> lm_corpus;
  lm_corpus.reserve(oriented.size());
  for (const auto& p : oriented) {
    auto toks = p.tgt.tokens;
    if (options.orientation == Orientation::r2l) std::reverse(toks.begin(), toks.end());
    lm_corpus.push_back(std::move(toks));
  }

  TranslatorSpec spec;
  spec.direction = options.direction;
  spec.orientation = options.orientation;
  spec.lexicon = std::move(m2.lexicon);
  spec.lm = NgramLm::train(lm_corpus, options.lm);
  spec.weights = options.weights;
  spec.beam = options.beam;
  spec.fanout = options.fanout;
  spec.model_id = options.model_id;
  if (spec.beam < 1) throw Error("beam must be >= 1");
  return spec;
}

NBestList decode(const TranslatorSpec& spec, const Sentence& source, std::size_t n) {
  if (n < 1) throw Error("n-best size must be >= 1");
  if (n > spec.beam) {
    throw Error("n-best size " + std::to_string(n) + " exceeds beam " + std::to_string(spec.beam));
  }
  NBestList out;
  out.model_id = spec.model_id;
  out.source = source;

  const auto& src = source.tokens;
  const bool r2l = spec.orientation == Orientation::r2l;
  const std::size_t len = src.size();

  // Candidate (token, lexical log-prob, lm id) per source position.
  struct Candidate {
    std::string token;
    double lex;
    NgramLm::WordId id;
  };
  std::vector<std::vector<Candidate>> cands(len);
  for (std::size_t pos = 0; pos < len; ++pos) {
    const auto& f = src[pos];
    std::vector<std::string> options;
    if (spec.lexicon.knows_source(f)) {
      for (auto& [e, p] : spec.lexicon.candidates(f, spec.fanout)) options.push_back(std::move(e));
    }
    if (options.empty()) options.push_back(f);
    for (auto& e : options) {
      const double lp = lex_logprob(spec.lexicon, src, pos, e);
      const auto id = spec.lm.id(e);
      cands[pos].push_back({std::move(e), lp, id});
    }
  }

  std::vector<Partial> beam(1);
  beam[0].state = spec.lm.initial_state();
  for (std::size_t step = 0; step < len; ++step) {
    const std::size_t pos = r2l ? len - 1 - step : step;
    std::vector<Partial> next;
    next.reserve(beam.size() * cands[pos].size());
    for (const auto& p : beam) {
      for (const auto& c : cands[pos]) {
        Partial q;
        q.tokens = p.tokens;
        q.tokens.push_back(c.token);
        q.state = p.state;
        q.lex = p.lex + c.lex;
        q.lm = p.lm + spec.lm.score(q.state, c.id);
        q.score = combine(spec.weights, q.lex, q.lm, static_cast<double>(q.tokens.size()));
        next.push_back(std::move(q));
      }
    }
    std::sort(next.begin(), next.end(), better);
    // The last step is left unpruned so every completion competes with its
    // end-of-sentence score included.
    if (step + 1 < len && next.size() > spec.beam) next.resize(spec.beam);
    beam = std::move(next);
  }

  std::vector<Hypothesis> complete;
  complete.reserve(beam.size());
  for (auto& p : beam) {
    Hypothesis h;
    h.lex = p.lex;
    h.lm = p.lm + spec.lm.score(p.state, NgramLm::kEos);
    h.len = static_cast<double>(p.tokens.size());
    h.logscore = combine(spec.weights, h.lex, h.lm, h.len);
    h.tokens = std::move(p.tokens);
    if (r2l) std::reverse(h.tokens.begin(), h.tokens.end());
    complete.push_back(std::move(h));
  }
  std::sort(complete.begin(), complete.end(), better_hyp);
  for (auto& h : complete) {
    if (out.hyps.size() >= n) break;
    const bool seen = std::any_of(out.hyps.begin(), out.hyps.end(),
                                  [&](const Hypothesis& o) { return o.tokens == h.tokens; });
    if (!seen) out.hyps.push_back(std::move(h));
  }
  return out;
}

Hypothesis score_hypothesis(const TranslatorSpec& spec, std::span<const std::string> source,
                            std::span<const std::string> output) {
  std::vector<std::string> native(output.begin(), output.end());
  if (spec.orientation == Orientation::r2l) std::reverse(native.begin(), native.end());
  Hypothesis h;
  // Summed in generation order, as decode does.
  const bool r2l = spec.orientation == Orientation::r2l;
  for (std::size_t k = 0; k < native.size(); ++k) {
    const std::size_t i = r2l ? native.size() - 1 - k : k;
    h.lex += lex_logprob(spec.lexicon, source, i, native[k]);
  }
  h.lm = spec.lm.logprob(native);
  h.len = static_cast<double>(native.size());
  h.logscore = combine(spec.weights, h.lex, h.lm, h.len);
  h.tokens.assign(output.begin(), output.end());
  return h;
}

void TranslatorSpec::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  std::ofstream out(dir / "spec.txt", std::ios::binary);
  if (!out) throw Error("cannot write " + (dir / "spec.txt").string());
  out << "model_id=" << model_id << '\n'
      << "direction=" << direction_name(direction) << '\n'
      << "orientation=" << orientation_name(orientation) << '\n'
      << "weight.lex=" << numfmt::format(weights.lex) << '\n'
      << "weight.lm=" << numfmt::format(weights.lm) << '\n'
      << "weight.len=" << numfmt::format(weights.len) << '\n'
      << "beam=" << beam << '\n'
      << "fanout=" << fanout << '\n';
  out.close();
  lexicon.save(dir / "lexicon.txt");
  lm.save(dir / "lm.txt");
}

TranslatorSpec TranslatorSpec::load(const std::filesystem::path& dir) {
  TranslatorSpec spec;
  for (const auto& line : read_lines(dir / "spec.txt")) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw FormatError(dir.string() + "/spec.txt: bad line '" + line + "'");
    const std::string key = line.substr(0, eq);
    const std::string value = line.substr(eq + 1);
    if (key == "model_id") {
      spec.model_id = value;
    } else if (key == "direction") {
      if (value != "s2t" && value != "t2s") throw FormatError("bad direction '" + value + "'");
      spec.direction = value == "s2t" ? Direction::s2t : Direction::t2s;
    } else if (key == "orientation") {
      if (value != "l2r" && value != "r2l") throw FormatError("bad orientation '" + value + "'");
      spec.orientation = value == "l2r" ? Orientation::l2r : Orientation::r2l;
    } else if (key == "weight.lex") {
      spec.weights.lex = numfmt::parse(value);
    } else if (key == "weight.lm") {
      spec.weights.lm = numfmt::parse(value);
    } else if (key == "weight.len") {
      spec.weights.len = numfmt::parse(value);
    } else if (key == "beam") {
      spec.beam = std::stoull(value);
    } else if (key == "fanout") {
      spec.fanout = std::stoull(value);
    } else {
      throw FormatError(dir.string() + "/spec.txt: unknown key '" + key + "'");
    }
  }
  spec.lexicon = LexiconTable::load(dir / "lexicon.txt");
  spec.lm = NgramLm::load(dir / "lm.txt");
  return spec;
}

void write_nbest(const std::filesystem::path& path, std::span<const NBestList> lists) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  for (const auto& list : lists) {
    for (std::size_t r = 0; r < list.hyps.size(); ++r) {
      const auto& h = list.hyps[r];
      nlohmann::ordered_json j;
      j["sent_id"] = list.sent_id;
      j["model_id"] = list.model_id;
      j["rank"] = r;
      j["src"] = join(list.source.tokens);
      j["tokens"] = h.tokens;
      j["logscore"] = h.logscore;
      nlohmann::ordered_json f;
      f["l2r"] = h.logscore;
      f["lm"] = h.lm;
      f["lex"] = h.lex;
      f["len"] = h.len;
      for (const auto& [name, v] : h.features) f[name] = v;
      j["features"] = std::move(f);
      out << j.dump() << '\n';
    }
  }
}

std::vector<NBestList> read_nbest(const std::filesystem::path& path) {
  std::vector<NBestList> lists;
  std::size_t line_no = 0;
  for (const auto& line : read_lines(path)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      const auto sent_id = j.at("sent_id").get<std::size_t>();
      const auto model_id = j.at("model_id").get<std::string>();
      if (lists.empty() || lists.back().sent_id != sent_id || lists.back().model_id != model_id) {
        NBestList list;
        list.sent_id = sent_id;
        list.model_id = model_id;
        if (j.contains("src")) list.source = from_tokenized(j.at("src").get<std::string>());
        lists.push_back(std::move(list));
      }
      Hypothesis h;
      h.tokens = j.at("tokens").get<std::vector<std::string>>();
      h.logscore = j.at("logscore").get<double>();
      if (j.contains("features")) {
        for (const auto& [name, v] : j.at("features").items()) {
          if (name == "lm") {
            h.lm = v.get<double>();
          } else if (name == "lex") {
            h.lex = v.get<double>();
          } else if (name == "len") {
            h.len = v.get<double>();
          } else if (name != "l2r") {
            h.features[name] = v.get<double>();
          }
        }
      }
      lists.back().hyps.push_back(std::move(h));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return lists;
}

std::vector<Sentence> one_best(std::span<const NBestList> lists) {
  std::vector<Sentence> out;
  out.reserve(lists.size());
  for (const auto& l : lists) {
    out.push_back(l.hyps.empty() ? Sentence{} : make_sentence(l.hyps.front().tokens));
  }
  return out;
}

}  // namespace cyclemt
