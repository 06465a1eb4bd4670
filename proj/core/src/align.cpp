#include "cyclemt/align.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <tuple>

#include "cyclemt/error.hpp"
#include "numfmt.hpp"

namespace cyclemt {

// --- Vocab ---------------------------------------------------------------

Vocab::Id Vocab::add(std::string_view word) {
  const auto [it, inserted] = ids_.emplace(std::string(word), static_cast<Id>(words_.size()));
  if (inserted) words_.emplace_back(word);
  return it->second;
}

std::optional<Vocab::Id> Vocab::find(std::string_view word) const {
  const auto it = ids_.find(std::string(word));
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

// --- LexiconTable --------------------------------------------------------

LexiconTable::LexiconTable() { src_.add(kNull); }

std::optional<double> LexiconTable::find(Vocab::Id e, Vocab::Id f) const {
  const auto it = table_.find(key(e, f));
  if (it == table_.end()) return std::nullopt;
  return it->second;
}

double LexiconTable::prob(std::string_view e, std::string_view f) const {
  const auto fe = src_.find(f);
  const auto ee = tgt_.find(e);
  if (!fe || !ee) return 0.0;
  return find(*ee, *fe).value_or(0.0);
}

bool LexiconTable::knows_source(std::string_view f) const {
  const auto id = src_.find(f);
  return id.has_value() && *id != 0;
}

void LexiconTable::set(std::string_view e, std::string_view f, double p) {
  table_[key(tgt_.add(e), src_.add(f))] = p;
  by_source_.ready = false;
}

void LexiconTable::index() const {
  if (by_source_.ready.load(std::memory_order_acquire)) return;
  const std::lock_guard lock(by_source_.mu);
  if (by_source_.ready.load(std::memory_order_relaxed)) return;
  auto& rows = by_source_.rows;
  rows.assign(src_.size(), {});
  for (const auto& [k, p] : table_) {
    rows[static_cast<std::size_t>(k >> 32)].emplace_back(static_cast<Vocab::Id>(k & 0xffffffffu), p);
  }
  for (auto& row : rows) {
    std::sort(row.begin(), row.end(), [this](const auto& a, const auto& b) {
      if (a.second != b.second) return a.second > b.second;
      return tgt_.word(a.first) < tgt_.word(b.first);
    });
  }
  by_source_.ready.store(true, std::memory_order_release);
}

std::vector<std::pair<std::string, double>> LexiconTable::candidates(std::string_view f,
                                                                     std::size_t k) const {
  std::vector<std::pair<std::string, double>> out;
  const auto id = src_.find(f);
  if (!id) return out;
  index();
  const auto& row = by_source_.rows[*id];
  for (std::size_t i = 0; i < row.size() && out.size() < k; ++i) {
    out.emplace_back(tgt_.word(row[i].first), row[i].second);
  }
  return out;
}

std::unordered_map<std::string, double> LexiconTable::source_mass() const {
  std::unordered_map<std::string, double> mass;
  for (const auto& [k, p] : table_) mass[src_.word(static_cast<Vocab::Id>(k >> 32))] += p;
  return mass;
}

void LexiconTable::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  std::map<std::pair<std::string, std::string>, double> sorted;
  for (const auto& [k, p] : table_) {
    sorted[{tgt_.word(static_cast<Vocab::Id>(k & 0xffffffffu)),
            src_.word(static_cast<Vocab::Id>(k >> 32))}] = p;
  }
  for (const auto& [ef, p] : sorted) out << ef.first << ' ' << ef.second << ' ' << numfmt::format(p) << '\n';
}

LexiconTable LexiconTable::load(const std::filesystem::path& path) {
  LexiconTable lex;
  std::size_t line_no = 0;
  for (const auto& line : read_lines(path)) {
    ++line_no;
    if (line.empty()) continue;
    const Sentence f = from_tokenized(line);
    if (f.tokens.size() != 3) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": expected 'e f prob'");
    }
    lex.set(f.tokens[0], f.tokens[1], numfmt::parse(f.tokens[2]));
  }
  return lex;
}

// --- DistortionTable -----------------------------------------------------

std::uint64_t DistortionTable::key(std::size_t i, std::size_t m, std::size_t l) {
  return (static_cast<std::uint64_t>(i) << 42) | (static_cast<std::uint64_t>(m) << 21) |
         static_cast<std::uint64_t>(l);
}

double DistortionTable::prob(std::size_t j, std::size_t i, std::size_t m, std::size_t l) const {
  const auto it = rows_.find(key(i, m, l));
  if (it == rows_.end()) return 1.0 / static_cast<double>(m + 1);
  return j < it->second.size() ? it->second[j] : 0.0;
}

std::span<const double> DistortionTable::row(std::size_t i, std::size_t m, std::size_t l) const {
  const auto it = rows_.find(key(i, m, l));
  if (it == rows_.end()) return {};
  return it->second;
}

void DistortionTable::set_row(std::size_t i, std::size_t m, std::size_t l, std::vector<double> q) {
  if (q.size() != m + 1) throw Error("distortion row must have m+1 entries");
  rows_[key(i, m, l)] = std::move(q);
}

void DistortionTable::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  std::map<std::uint64_t, const std::vector<double>*> sorted;
  for (const auto& [k, row] : rows_) sorted[k] = &row;
  for (const auto& [k, row] : sorted) {
    const std::uint64_t mask = (1u << 21) - 1;
    const auto i = k >> 42;
    const auto m = (k >> 21) & mask;
    const auto l = k & mask;
    for (std::size_t j = 0; j < row->size(); ++j) {
      out << i << ' ' << j << ' ' << m << ' ' << l << ' ' << numfmt::format((*row)[j]) << '\n';
    }
  }
}

DistortionTable DistortionTable::load(const std::filesystem::path& path) {
  std::map<std::tuple<std::size_t, std::size_t, std::size_t>, std::vector<double>> rows;
  std::size_t line_no = 0;
  for (const auto& line : read_lines(path)) {
    ++line_no;
    if (line.empty()) continue;
    const Sentence f = from_tokenized(line);
    if (f.tokens.size() != 5) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": expected 'i j m l prob'");
    }
    const auto i = std::stoull(f.tokens[0]);
    const auto j = std::stoull(f.tokens[1]);
    const auto m = std::stoull(f.tokens[2]);
    const auto l = std::stoull(f.tokens[3]);
    auto& row = rows[{i, m, l}];
    row.resize(m + 1, 0.0);
    if (j > m) throw FormatError(path.string() + ":" + std::to_string(line_no) + ": j > m");
    row[j] = numfmt::parse(f.tokens[4]);
  }
  DistortionTable dist;
  for (auto& [k, row] : rows) dist.set_row(std::get<0>(k), std::get<1>(k), std::get<2>(k), std::move(row));
  return dist;
}

// --- EM ------------------------------------------------------------------

namespace {

/// Corpus compiled to dense parameter indices. Identical pairs are merged
/// into one entry with a multiplicity weight.
struct CompiledCorpus {
  Vocab src;  // id 0 = NULL
  Vocab tgt;
  struct Pair {
    std::vector<Vocab::Id> f;  // with NULL at 0
    std::vector<Vocab::Id> e;
    double weight = 0.0;
    std::vector<std::uint32_t> t_index;  // e-major: i * (m+1) + j
  };
  std::vector<Pair> pairs;
  std::vector<std::uint64_t> param_key;  // (f << 32) | e
  std::vector<Vocab::Id> param_f;
};

CompiledCorpus compile(std::span<const SentencePair> input) {
  if (input.empty()) throw Error("empty training corpus");
  CompiledCorpus c;
  c.src.add(LexiconTable::kNull);
  std::map<std::pair<std::vector<Vocab::Id>, std::vector<Vocab::Id>>, std::size_t> seen;
  for (const auto& sp : input) {
    std::vector<Vocab::Id> f{0};
    for (const auto& w : sp.src.tokens) f.push_back(c.src.add(w));
    std::vector<Vocab::Id> e;
    for (const auto& w : sp.tgt.tokens) e.push_back(c.tgt.add(w));
    const auto [it, inserted] = seen.try_emplace({f, e}, c.pairs.size());
    if (!inserted) {
      c.pairs[it->second].weight += 1.0;
      continue;
    }
    CompiledCorpus::Pair p;
    p.f = std::move(f);
    p.e = std::move(e);
    p.weight = 1.0;
    c.pairs.push_back(std::move(p));
  }
  std::unordered_map<std::uint64_t, std::uint32_t> index;
  for (auto& p : c.pairs) {
    p.t_index.reserve(p.e.size() * p.f.size());
    for (const auto e : p.e) {
      for (const auto f : p.f) {
        const std::uint64_t k = (static_cast<std::uint64_t>(f) << 32) | e;
        const auto [it, inserted] = index.try_emplace(k, static_cast<std::uint32_t>(c.param_key.size()));
        if (inserted) {
          c.param_key.push_back(k);
          c.param_f.push_back(f);
        }
        p.t_index.push_back(it->second);
      }
    }
  }
  return c;
}

LexiconTable to_lexicon(const CompiledCorpus& c, const std::vector<double>& t) {
  LexiconTable lex;
  for (std::size_t p = 0; p < t.size(); ++p) {
    const auto k = c.param_key[p];
    lex.set(c.tgt.word(static_cast<Vocab::Id>(k & 0xffffffffu)),
            c.src.word(static_cast<Vocab::Id>(k >> 32)), t[p]);
  }
  return lex;
}

void normalize_lexicon(const CompiledCorpus& c, const std::vector<double>& counts,
                       std::vector<double>& t) {
  std::vector<double> total(c.src.size(), 0.0);
  for (std::size_t p = 0; p < counts.size(); ++p) total[c.param_f[p]] += counts[p];
  for (std::size_t p = 0; p < counts.size(); ++p) {
    const double tot = total[c.param_f[p]];
    t[p] = tot > 0.0 ? counts[p] / tot : 0.0;
  }
}

}  // namespace

Ibm1Result ibm1_train(std::span<const SentencePair> pairs, std::size_t iters) {
  if (iters < 1) throw Error("ibm1_train needs at least one iteration");
  const CompiledCorpus c = compile(pairs);
  std::vector<double> t(c.param_key.size(), 1.0 / static_cast<double>(c.tgt.size()));
  std::vector<double> counts(t.size());
  Ibm1Result result;

  auto e_step = [&](bool accumulate) {
    double ll = 0.0;
    for (const auto& p : c.pairs) {
      const std::size_t width = p.f.size();
      const double norm = 1.0 / static_cast<double>(width);
      for (std::size_t i = 0; i < p.e.size(); ++i) {
        const std::uint32_t* idx = &p.t_index[i * width];
        double denom = 0.0;
        for (std::size_t j = 0; j < width; ++j) denom += t[idx[j]];
        ll += p.weight * std::log(denom * norm);
        if (!accumulate) continue;
        for (std::size_t j = 0; j < width; ++j) counts[idx[j]] += p.weight * t[idx[j]] / denom;
      }
    }
    return ll;
  };

  for (std::size_t it = 0; it < iters; ++it) {
    std::fill(counts.begin(), counts.end(), 0.0);
    result.log_likelihood.push_back(e_step(true));
    normalize_lexicon(c, counts, t);
  }
  result.log_likelihood.push_back(e_step(false));
  result.lexicon = to_lexicon(c, t);
  return result;
}

Ibm2Result ibm2_train(std::span<const SentencePair> pairs, std::size_t iters,
                      const LexiconTable& init) {
  const CompiledCorpus c = compile(pairs);

  std::vector<double> t(c.param_key.size());
  for (std::size_t p = 0; p < t.size(); ++p) {
    const auto k = c.param_key[p];
    const double v = init.prob(c.tgt.word(static_cast<Vocab::Id>(k & 0xffffffffu)),
                               c.src.word(static_cast<Vocab::Id>(k >> 32)));
    t[p] = v > 0.0 ? v : kOovFloor;
  }

  // Distortion rows keyed by (i, m, l), stored densely.
  struct RowKey {
    std::size_t i, m, l;
    auto operator<=>(const RowKey&) const = default;
  };
  std::map<RowKey, std::size_t> row_offset;
  std::vector<RowKey> row_keys;
  std::size_t q_size = 0;
  std::vector<std::vector<std::size_t>> pair_rows(c.pairs.size());
  for (std::size_t pi = 0; pi < c.pairs.size(); ++pi) {
    const auto& p = c.pairs[pi];
    const std::size_t m = p.f.size() - 1;
    const std::size_t l = p.e.size();
    for (std::size_t i = 1; i <= l; ++i) {
      const auto [it, inserted] = row_offset.try_emplace(RowKey{i, m, l}, q_size);
      if (inserted) {
        row_keys.push_back({i, m, l});
        q_size += m + 1;
      }
      pair_rows[pi].push_back(it->second);
    }
  }
  std::vector<double> q(q_size);
  for (const auto& [rk, off] : row_offset) {
    std::fill_n(q.begin() + static_cast<std::ptrdiff_t>(off), rk.m + 1, 1.0 / static_cast<double>(rk.m + 1));
  }

  std::vector<double> t_counts(t.size());
  std::vector<double> q_counts(q.size());
  auto e_step = [&](bool accumulate) {
    double ll = 0.0;
    for (std::size_t pi = 0; pi < c.pairs.size(); ++pi) {
      const auto& p = c.pairs[pi];
      const std::size_t width = p.f.size();
      for (std::size_t i = 0; i < p.e.size(); ++i) {
        const std::uint32_t* idx = &p.t_index[i * width];
        const std::size_t qoff = pair_rows[pi][i];
        double denom = 0.0;
        for (std::size_t j = 0; j < width; ++j) denom += t[idx[j]] * q[qoff + j];
        ll += p.weight * std::log(denom);
        if (!accumulate) continue;
        for (std::size_t j = 0; j < width; ++j) {
          const double post = p.weight * t[idx[j]] * q[qoff + j] / denom;
          t_counts[idx[j]] += post;
          q_counts[qoff + j] += post;
        }
      }
    }
    return ll;
  };

  Ibm2Result result;
  for (std::size_t it = 0; it < iters; ++it) {
    std::fill(t_counts.begin(), t_counts.end(), 0.0);
    std::fill(q_counts.begin(), q_counts.end(), 0.0);
    result.log_likelihood.push_back(e_step(true));
    normalize_lexicon(c, t_counts, t);
    for (const auto& [rk, off] : row_offset) {
      double total = 0.0;
      for (std::size_t j = 0; j <= rk.m; ++j) total += q_counts[off + j];
      if (total <= 0.0) continue;
      for (std::size_t j = 0; j <= rk.m; ++j) q[off + j] = q_counts[off + j] / total;
    }
  }
  result.log_likelihood.push_back(e_step(false));

  if (iters == 0) {
    result.lexicon = init;
    return result;
  }
  result.lexicon = to_lexicon(c, t);
  for (const auto& [rk, off] : row_offset) {
    result.distortion.set_row(rk.i, rk.m, rk.l,
                              std::vector<double>(q.begin() + static_cast<std::ptrdiff_t>(off),
                                                  q.begin() + static_cast<std::ptrdiff_t>(off + rk.m + 1)));
  }
  return result;
}

// --- scoring -------------------------------------------------------------

Alignment align_viterbi(const LexiconTable& lex, const DistortionTable& dist,
                        std::span<const std::string> src, std::span<const std::string> tgt) {
  if (tgt.empty()) throw Error("cannot score an empty target sentence");
  const std::size_t m = src.size();
  const std::size_t l = tgt.size();
  std::vector<std::optional<Vocab::Id>> f_ids(m + 1);
  f_ids[0] = 0;
  for (std::size_t j = 0; j < m; ++j) f_ids[j + 1] = lex.source_vocab().find(src[j]);

  Alignment a;
  a.links.resize(l);
  double total = 0.0;
  for (std::size_t i = 0; i < l; ++i) {
    const auto e_id = lex.target_vocab().find(tgt[i]);
    double best = -1.0;
    std::size_t best_j = 0;
    for (std::size_t j = 0; j <= m; ++j) {
      double t = kOovFloor;
      if (e_id && f_ids[j]) t = std::max(kOovFloor, lex.find(*e_id, *f_ids[j]).value_or(0.0));
      const double v = t * dist.prob(j, i + 1, m, l);
      if (v > best) {
        best = v;
        best_j = j;
      }
    }
    total += std::log(std::max(best, std::numeric_limits<double>::min()));
    a.links[i] = best_j == 0 ? std::nullopt : std::optional<std::size_t>(best_j - 1);
  }
  a.score = total / static_cast<double>(l);
  return a;
}

double align_score(const LexiconTable& lex, const DistortionTable& dist, const SentencePair& pair) {
  return align_viterbi(lex, dist, pair.src.tokens, pair.tgt.tokens).score;
}

std::vector<SentencePair> swap_sides(std::span<const SentencePair> pairs) {
  std::vector<SentencePair> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) {
    SentencePair s = p;
    std::swap(s.src, s.tgt);
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace cyclemt
