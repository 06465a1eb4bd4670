// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero when any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <optional>
#include <random>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "oracles.hpp"
#include "testkit.hpp"

#include "cyclemt/align.hpp"
#include "cyclemt/augment.hpp"
#include "cyclemt/cipher.hpp"
#include "cyclemt/combine.hpp"
#include "cyclemt/metrics.hpp"
#include "cyclemt/pipeline.hpp"
#include "cyclemt/postprocess.hpp"
#include "cyclemt/rerank.hpp"
#include "cyclemt/subword.hpp"

using namespace cyclemt;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

// ---------------------------------------------------------------------------

Outcome mixture_sizes() {
  const std::size_t parallel = 5831606, synthetic = 75940978;
  const auto small = small_corpus_size(parallel, synthetic);
  const auto big = big_corpus_size(parallel, synthetic, MixturePlan{}.parallel_repeat);
  return {small == 11663212 && big == 151751856,
          "small=" + std::to_string(small) + " big=" + std::to_string(big)};
}

Outcome number_repair() {
  const auto src = tokenize("Siltalan edellinen kausi liigassa oli 2006-07", "fi");
  const auto hyp = tokenize("Siltala's previous season in the league was 2006 at 07", "en");
  const auto out = detokenize(repair_numbers(src, hyp));
  return {out == "Siltala's previous season in the league was 2006-07", "\"" + out + "\""};
}

Outcome decode_oracle() {
  std::mt19937_64 rng(20201);
  std::size_t mismatches = 0;
  const std::size_t n = 1500;
  for (std::size_t round = 0; round < n; ++round) {
    const auto inst = oracles::random_instance(rng, round % 2 ? Orientation::r2l : Orientation::l2r);
    const auto src = oracles::random_source(rng, 1 + rng() % 3);
    const auto best = oracles::enumerate(inst, src).front();
    const auto got = decode(inst.spec, make_sentence(src), 1);
    if (got.hyps.empty() || got.hyps[0].tokens != best.tokens || std::abs(got.hyps[0].logscore - best.score) > 1e-9) {
      ++mismatches;
    }
  }
  return {mismatches == 0, std::to_string(n) + " instances, " + std::to_string(mismatches) + " mismatches"};
}

std::vector<std::string> random_words(std::mt19937_64& rng, std::size_t min_len, std::size_t max_len, int vocab) {
  std::vector<std::string> t(min_len + rng() % (max_len - min_len + 1));
  for (auto& w : t) w = "w" + std::to_string(rng() % static_cast<unsigned>(vocab));
  return t;
}

Outcome backbone_oracle() {
  std::mt19937_64 rng(20203);
  std::size_t mismatches = 0;
  const std::size_t n = 5000;
  for (std::size_t round = 0; round < n; ++round) {
    std::vector<SystemOutput> outputs;
    for (int k = 0; k < 4; ++k) outputs.push_back({"s" + std::to_string(k), random_words(rng, 0, 6, 3)});
    std::shuffle(outputs.begin(), outputs.end(), rng);
    mismatches += choose_backbone(outputs) != oracles::backbone(outputs);
  }
  return {mismatches == 0, std::to_string(n) + " cases, " + std::to_string(mismatches) + " mismatches"};
}

Outcome gmse_oracle() {
  std::mt19937_64 rng(20207);
  std::size_t mismatches = 0;
  const std::size_t n = 300;
  for (std::size_t round = 0; round < n; ++round) {
    std::vector<std::vector<std::string>> refs;
    for (int s = 0; s < 8; ++s) refs.push_back(random_words(rng, 4, 9, 6));
    SystemPool pool;
    for (const std::string id : {"a", "b", "c"}) {
      const auto noise = rng() % 4;
      for (const auto& ref : refs) {
        auto t = ref;
        for (auto& w : t) {
          if (rng() % 6 < noise) w = "w" + std::to_string(rng() % 6);
        }
        pool.systems[id].push_back(t);
      }
    }
    const CorpusMetric bleu = [&](const std::vector<Tokens>& hyps) { return bleu_corpus_tokens(hyps, refs).bleu; };
    std::vector<std::string> ids;
    std::map<std::string, double> single;
    for (const auto& [id, outs] : pool.systems) {
      ids.push_back(id);
      single[id] = bleu(outs);
    }
    const auto path = oracles::greedy_path(ids, single, [&](const std::vector<std::string>& subset) {
      std::vector<Tokens> hyps;
      for (const auto& c : combine_pool(pool, subset)) hyps.push_back(c.tokens);
      return bleu(hyps);
    });
    const auto got = gmse(pool, bleu);
    mismatches += got.selection != path.selection || got.score != path.score || got.score < path.best_single;
  }
  return {mismatches == 0, std::to_string(n) + " pools, " + std::to_string(mismatches) + " mismatches"};
}

Outcome em_monotone() {
  std::mt19937_64 rng(20209);
  std::size_t violations = 0;
  double worst = 0.0;
  for (int corpus = 0; corpus < 100; ++corpus) {
    std::vector<SentencePair> pairs(5 + rng() % 26);
    for (auto& p : pairs) {
      p.src = make_sentence(random_words(rng, 1, 7, 8));
      p.tgt = make_sentence(random_words(rng, 1, 7, 8));
    }
    const auto m1 = ibm1_train(pairs, 10);
    const auto m2 = ibm2_train(pairs, 10, m1.lexicon);
    for (const auto* ll : {&m1.log_likelihood, &m2.log_likelihood}) {
      for (std::size_t i = 1; i < ll->size(); ++i) {
        const double drop = (*ll)[i - 1] - (*ll)[i];
        worst = std::max(worst, drop);
        violations += drop > 1e-9;
      }
    }
  }
  return {violations == 0, "100 corpora x 10 iterations, " + std::to_string(violations) +
                               " decreases, largest drop " + fmt("%.3g", worst)};
}

Outcome roundtrips() {
  std::mt19937_64 rng(20211);
  std::vector<std::string> texts(10000);
  for (auto& t : texts) t = testkit::fuzz_text(rng);
  std::size_t tok_fail = 0, bpe_fail = 0;
  std::vector<Sentence> tokenized;
  for (const auto& t : texts) {
    tokenized.push_back(tokenize(t));
    tok_fail += detokenize(tokenized.back()) != normalize_whitespace(t);
  }
  const auto model = bpe_learn(std::span<const Sentence>(tokenized.data(), 2000), 300);
  for (const auto& s : tokenized) bpe_fail += bpe_reverse(bpe_apply(model, s)).sentence.tokens != s.tokens;
  return {tok_fail == 0 && bpe_fail == 0, "10000 sentences, tokenizer failures " + std::to_string(tok_fail) +
                                              ", BPE failures " + std::to_string(bpe_fail)};
}

Outcome bleu_ground_truth() {
  std::mt19937_64 rng(20213);
  double worst = 0.0;
  for (int round = 0; round < 100; ++round) {
    std::vector<std::vector<std::string>> x;
    for (int s = 0; s < 10; ++s) x.push_back(random_words(rng, 4, 20, 40));
    worst = std::max(worst, std::abs(bleu_corpus_tokens(x, x).bleu - 100.0));
  }
  const auto clip = bleu_corpus(std::vector<std::string>{"the the the the the the the"},
                                std::vector<std::string>{"the cat is on the mat"});
  const bool clip_ok = clip.precisions[0] == 2.0 / 7.0;
  const auto bp = bleu_corpus(std::vector<std::string>{"a b c d e f"}, std::vector<std::string>{"a b c d e f g h i"});
  const double bp_err = std::abs(bp.bleu - 100.0 * std::exp(1.0 - 9.0 / 6.0));
  return {worst <= 1e-9 && clip_ok && bp_err <= 1e-9,
          "identity error " + fmt("%.3g", worst) + ", unigram precision " + fmt("%.17g", clip.precisions[0]) +
              ", brevity error " + fmt("%.3g", bp_err)};
}

Outcome mira_separable() {
  std::mt19937_64 rng(20219);
  std::normal_distribution<double> noise(0.0, 20.0), small(0.0, 1.0);
  auto make = [&](std::size_t lists, std::vector<NBestList>& out, std::vector<std::vector<std::string>>& refs) {
    for (std::size_t i = 0; i < lists; ++i) {
      refs.push_back(random_words(rng, 8, 16, 50));
      NBestList list;
      for (int k = 0; k < 10; ++k) {
        Hypothesis h;
        h.tokens = refs.back();
        const double rate = static_cast<double>(rng() % 100) / 100.0;
        for (auto& w : h.tokens) {
          if (static_cast<double>(rng() % 1000) / 1000.0 < rate) w = "w" + std::to_string(rng() % 50);
        }
        FeatureVector f{};
        for (auto& x : f) x = small(rng);
        f[0] = noise(rng);
        f[3] = bleu_sentence(h.tokens, refs.back());
        for (std::size_t d = 0; d < kNumFeatures; ++d) h.features[std::string(kFeatureNames[d])] = f[d];
        list.hyps.push_back(h);
      }
      // Decoder order follows the noisy l2r feature.
      std::stable_sort(list.hyps.begin(), list.hyps.end(), [](const Hypothesis& a, const Hypothesis& b) {
        return a.features.at("l2r_score") > b.features.at("l2r_score");
      });
      out.push_back(list);
    }
  };
  std::vector<NBestList> train, held;
  std::vector<std::vector<std::string>> train_refs, held_refs;
  make(300, train, train_refs);
  make(500, held, held_refs);
  const auto model = mira_train(train, train_refs);

  std::size_t hits = 0;
  std::vector<std::vector<std::string>> before, after;
  for (std::size_t i = 0; i < held.size(); ++i) {
    double best = -1.0;
    for (const auto& h : held[i].hyps) best = std::max(best, bleu_sentence(h.tokens, held_refs[i]));
    const auto reranked = rerank_apply(model, held[i]);
    hits += bleu_sentence(reranked.hyps[0].tokens, held_refs[i]) == best;
    before.push_back(held[i].hyps[0].tokens);
    after.push_back(reranked.hyps[0].tokens);
  }
  const double rate = static_cast<double>(hits) / static_cast<double>(held.size());
  const double b0 = bleu_corpus_tokens(before, held_refs).bleu, b1 = bleu_corpus_tokens(after, held_refs).bleu;
  return {rate >= 0.95 && b1 > b0,
          "oracle-best top-1 on " + fmt("%.1f", 100 * rate) + "% of lists, BLEU " + fmt("%.2f", b0) + " -> " +
              fmt("%.2f", b1)};
}

// ---------------------------------------------------------------------------
// End-to-end runs share one generated corpus.

class EndToEnd {
 public:
  explicit EndToEnd(fs::path root) : root_(std::move(root)) {}

  const fs::path& root() const { return root_; }
  fs::path work(const std::string& run) const { return root_ / run / "work"; }

  PipelineConfig config(const std::string& run) {
    ensure_data();
    const auto dir = root_ / run;
    fs::create_directories(dir);
    std::ostringstream cfg;
    for (const auto& [key, file] : std::vector<std::pair<std::string, std::string>>{
             {"train_src", "train.src"}, {"train_tgt", "train.tgt"}, {"mono", "mono.tgt"}, {"dev_src", "dev.src"},
             {"dev_ref", "dev.ref"}, {"test_src", "test.src"}, {"test_ref", "test.ref"}}) {
      cfg << "data." << key << " = ../data/" << file << "\n";
    }
    cfg << "run.dir = work\n"
           "select.parallel.optimal_ratio = 1\n"
           "select.parallel.align_percentile_cut = 0.02\n"
           "select.mono.optimal_ratio = 1\n"
           "select.synthetic.optimal_ratio = 1\n"
           "bpe.ops = 50000\n"
           "cycle.ratio = 0.5\n";
    testkit::write_file(dir / "run.cfg", cfg.str());
    return PipelineConfig::load(dir / "run.cfg");
  }

  /// The first full run, executed on demand.
  const LadderReport& primary() {
    if (!primary_) {
      const auto start = std::chrono::steady_clock::now();
      run_pipeline(config("run1"));
      primary_seconds_ = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      primary_ = LadderReport::load(work("run1") / "report.json");
    }
    return *primary_;
  }
  double primary_seconds() const { return primary_seconds_; }

 private:
  void ensure_data() {
    if (data_ready_) return;
    CipherOptions o;  // 5k parallel, 20k mono, 30% planted noise
    write_cipher(generate_cipher(o), root_ / "data");
    data_ready_ = true;
  }

  fs::path root_;
  bool data_ready_ = false;
  std::optional<LadderReport> primary_;
  double primary_seconds_ = 0.0;
};

Outcome ladder(EndToEnd& e2e) {
  const auto& report = e2e.primary();
  std::string detail = "dev";
  bool monotone = true;
  double prev = -1.0;
  for (const auto& stage : ladder_stages()) {
    const double v = report.dev.at(stage);
    detail += " " + stage + "=" + fmt("%.2f", v);
    monotone = monotone && v >= prev;
    prev = v;
  }
  const double gain = report.dev.at(ladder_stages().back()) - report.dev.at(ladder_stages().front());
  detail += ", gain " + fmt("%+.2f", gain) + ", pipeline " + fmt("%.1f", e2e.primary_seconds()) + " s";
  return {monotone && gain >= 2.0, detail};
}

Outcome ablation(EndToEnd& e2e) {
  e2e.primary();
  const std::vector<double> ratios{0.0, 0.25, 0.5, 0.75};
  const auto rows = run_ablation(e2e.config("run1"), ratios);
  std::string detail;
  std::size_t best = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    detail += (i ? " " : "") + fmt("%.2f", rows[i].ratio) + ":" + fmt("%.2f", rows[i].dev_bleu);
    if (rows[i].dev_bleu > rows[best].dev_bleu) best = i;
  }
  detail += ", argmax " + fmt("%.2f", rows[best].ratio);
  return {rows.size() == 4 && rows[best].ratio > 0.0, std::to_string(rows.size()) + " rows, " + detail};
}

std::map<std::string, std::string> tree(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const auto rel = fs::relative(entry.path(), dir).generic_string();
    if (rel == "timings.json" || rel.rfind("ablation/", 0) == 0) continue;
    files[rel] = testkit::read_file(entry.path());
  }
  return files;
}

Outcome determinism(EndToEnd& e2e) {
  e2e.primary();
  run_pipeline(e2e.config("run2"));
  const auto a = tree(e2e.work("run1")), b = tree(e2e.work("run2"));
  std::size_t differing = 0;
  for (const auto& [rel, bytes] : a) {
    const auto it = b.find(rel);
    differing += it == b.end() || it->second != bytes;
  }
  for (const auto& [rel, _] : b) differing += !a.count(rel);
  const bool manifests = a.count("manifest.json") && b.count("manifest.json") && a.at("manifest.json") == b.at("manifest.json");
  return {differing == 0 && manifests,
          std::to_string(a.size()) + " files compared, " + std::to_string(differing) + " differ"};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cyclemt acceptance checks"};
  std::string work = "acceptance_work";
  std::vector<int> only;
  bool keep = false;
  app.add_option("--work", work, "scratch directory for the end-to-end runs");
  app.add_option("--only", only, "run just these criteria");
  app.add_flag("--keep", keep, "leave the scratch directory in place");
  CLI11_PARSE(app, argc, argv);

  fs::remove_all(work);
  fs::create_directories(work);
  EndToEnd e2e{fs::absolute(work)};

  struct Criterion {
    int id;
    std::string title;
    double budget;  // seconds
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {1, "mixture corpus sizes from symbolic counts", 1, mixture_sizes},
      {2, "split number range repair", 1, number_repair},
      {3, "decoder top-1 vs exhaustive enumeration", 60, decode_oracle},
      {3, "backbone vs brute-force edit distance", 60, backbone_oracle},
      {3, "greedy selection vs enumerated greedy path", 60, gmse_oracle},
      {4, "IBM 1/2 log-likelihood never decreases", 30, em_monotone},
      {5, "tokenizer and BPE roundtrips on fuzzed text", 30, roundtrips},
      {6, "BLEU identity, clipping and brevity penalty", 5, bleu_ground_truth},
      {7, "MIRA on separable n-best lists", 60, mira_separable},
      {8, "end-to-end dev BLEU ladder on the cipher pair", 600, [&] { return ladder(e2e); }},
      {9, "cycle ratio ablation", 900, [&] { return ablation(e2e); }},
      {10, "two identical runs are byte-identical", 600, [&] { return determinism(e2e); }},
  };

  int failed = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    Outcome out;
    const auto start = std::chrono::steady_clock::now();
    try {
      out = c.run();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = secs < c.budget;
    const bool pass = out.pass && in_time;
    failed += !pass;
    std::printf("criterion %-2d %s  %s: %s [%.2f s, limit %.0f s%s]\n", c.id, pass ? "PASS" : "FAIL", c.title.c_str(),
                out.detail.c_str(), secs, c.budget, in_time ? "" : ", over time");
    std::fflush(stdout);
  }
  if (!keep) fs::remove_all(work);
  return failed == 0 ? 0 : 1;
}
