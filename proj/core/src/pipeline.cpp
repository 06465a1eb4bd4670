#include "cyclemt/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <functional>
#include <optional>
#include <set>
#include <sstream>
#include <unordered_map>

#include "cyclemt/combine.hpp"
#include "cyclemt/digest.hpp"
#include "cyclemt/error.hpp"
#include "cyclemt/metrics.hpp"
#include "cyclemt/parallel.hpp"
#include "cyclemt/postprocess.hpp"
#include "cyclemt/subword.hpp"
#include "json.hpp"
#include "numfmt.hpp"

namespace cyclemt {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

// ---------------------------------------------------------------------------
// small file helpers

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

void write_doubles(const fs::path& path, std::span<const double> values) {
  std::vector<std::string> lines;
  lines.reserve(values.size());
  for (const double v : values) lines.push_back(numfmt::format(v));
  write_lines(path, lines);
}

std::vector<double> read_doubles(const fs::path& path) {
  std::vector<double> out;
  for (const auto& line : read_lines(path)) out.push_back(numfmt::parse(line));
  return out;
}

std::vector<SentencePair> read_pair_files(const fs::path& src, const fs::path& tgt, const std::string& src_lang,
                                          const std::string& tgt_lang) {
  auto s = read_tokenized(src, src_lang);
  auto t = read_tokenized(tgt, tgt_lang);
  if (s.size() != t.size()) throw FormatError(src.string() + " and " + tgt.string() + " differ in length");
  std::vector<SentencePair> out(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    out[i].src = std::move(s[i]);
    out[i].tgt = std::move(t[i]);
  }
  return out;
}

std::vector<Sentence> sources_of(std::span<const SentencePair> pairs) {
  std::vector<Sentence> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) out.push_back(p.src);
  return out;
}

std::vector<Sentence> targets_of(std::span<const SentencePair> pairs) {
  std::vector<Sentence> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) out.push_back(p.tgt);
  return out;
}

// ---------------------------------------------------------------------------
// system names and file layout

std::vector<std::string> small_names(const PipelineConfig& cfg) {
  std::vector<std::string> out;
  for (std::size_t k = 1; k <= cfg.plan.num_small_samples; ++k) out.push_back("small_" + std::to_string(k));
  return out;
}

/// Systems entering combination, in model_id order.
std::vector<std::string> pool_names(const PipelineConfig& cfg) {
  auto out = small_names(cfg);
  out.push_back("big");
  out.push_back("r2l");
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::string> decoded_names(const PipelineConfig& cfg) {
  std::vector<std::string> out{"base", "synthetic"};
  for (const auto& s : pool_names(cfg)) out.push_back(s);
  return out;
}

std::vector<std::string> model_files(const std::string& name) {
  const std::string dir = "models/" + name + "/";
  return {dir + "spec.txt", dir + "lexicon.txt", dir + "lm.txt"};
}

const std::vector<std::string>& eval_sets() {
  static const std::vector<std::string> sets{"dev", "test"};
  return sets;
}

// ---------------------------------------------------------------------------
// stage plumbing

struct Ctx {
  const PipelineConfig& cfg;
  StageRecord& rec;
  fs::path path(const std::string& rel) const { return cfg.work_dir / rel; }
};

struct Stage {
  std::string name;
  std::vector<std::string> config_prefixes;
  std::vector<std::string> inputs;   // "data.*" keys or work-dir paths
  std::vector<std::string> outputs;  // work-dir paths
  std::function<void(Ctx&)> run;
};

const std::map<std::string, fs::path PipelineConfig::*>& data_keys() {
  static const std::map<std::string, fs::path PipelineConfig::*> keys{
      {"data.train_src", &PipelineConfig::train_src}, {"data.train_tgt", &PipelineConfig::train_tgt},
      {"data.mono", &PipelineConfig::mono},           {"data.dev_src", &PipelineConfig::dev_src},
      {"data.dev_ref", &PipelineConfig::dev_ref},     {"data.test_src", &PipelineConfig::test_src},
      {"data.test_ref", &PipelineConfig::test_ref}};
  return keys;
}

fs::path resolve_input(const PipelineConfig& cfg, const std::string& name) {
  const auto& keys = data_keys();
  if (const auto it = keys.find(name); it != keys.end()) return cfg.*(it->second);
  return cfg.work_dir / name;
}

std::string config_digest(const Config& source, std::span<const std::string> prefixes) {
  std::string text;
  for (const auto& [key, value] : source.values()) {
    const bool hit = std::any_of(prefixes.begin(), prefixes.end(),
                                 [&](const std::string& p) { return key.compare(0, p.size(), p) == 0; });
    if (hit) text += key + "=" + value + "\n";
  }
  return sha256_hex(text);
}

ToyTrainOptions toy_options(const PipelineConfig& cfg, Direction d, Orientation o, std::string id) {
  ToyTrainOptions t;
  t.direction = d;
  t.orientation = o;
  t.ibm1_iters = cfg.ibm1_iters;
  t.ibm2_iters = cfg.ibm2_iters;
  t.lm = cfg.lm;
  t.weights = cfg.weights;
  t.beam = cfg.beam;
  t.fanout = cfg.fanout;
  t.model_id = std::move(id);
  return t;
}

std::vector<NBestList> decode_all(const TranslatorSpec& spec, std::span<const Sentence> sources, std::size_t n) {
  std::vector<NBestList> lists(sources.size());
  parallel_for(sources.size(), [&](std::size_t i) {
    lists[i] = decode(spec, sources[i], n);
    lists[i].sent_id = i;
  });
  return lists;
}

/// 1-best tokens per sentence id; sentences without hypotheses stay empty.
std::vector<Tokens> best_tokens(std::span<const NBestList> lists, std::size_t sentences) {
  std::vector<Tokens> out(sentences);
  for (const auto& l : lists) {
    if (l.sent_id >= sentences) throw FormatError("sentence id out of range");
    if (!l.hyps.empty()) out[l.sent_id] = l.hyps.front().tokens;
  }
  return out;
}

std::vector<std::string> finalize_all(std::span<const Tokens> hyps, const TruecaseModel& tc) {
  std::vector<std::string> out(hyps.size());
  parallel_for(hyps.size(), [&](std::size_t i) { out[i] = finalize(make_sentence(hyps[i]), tc); });
  return out;
}

double dev_bleu(std::span<const Tokens> hyps, const TruecaseModel& tc, std::span<const std::string> refs) {
  return bleu_corpus(finalize_all(hyps, tc), refs).bleu;
}

std::vector<SentencePair> filter_synthetic(const PipelineConfig& cfg, std::span<const SentencePair> pairs) {
  const auto lex = LexiconTable::load(cfg.work_dir / "align/lexicon.txt");
  const auto dist = DistortionTable::load(cfg.work_dir / "align/distortion.txt");
  return select_parallel(pairs, cfg.select_synthetic, {nullptr, &lex, &dist, nullptr}).retained;
}

/// Pairs each target sentence with its back translation line; empty lines
/// mark skipped sentences.
std::vector<SentencePair> synthetic_pairs(std::span<const Sentence> targets, std::span<const std::string> bt,
                                          const std::vector<bool>& cycled, const PipelineConfig& cfg) {
  std::vector<SentencePair> out;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (bt[i].empty()) continue;
    SentencePair p;
    p.src = from_tokenized(bt[i], cfg.src_lang);
    p.tgt = targets[i];
    p.origin = cycled[i] ? Origin::synthetic_cycle : Origin::synthetic_back;
    out.push_back(std::move(p));
  }
  return out;
}

/// Back translation lines for the sentences that changed, keyed by index.
std::map<std::size_t, std::string> back_translate_changed(const Translator& t2s, std::span<const Sentence> sentences,
                                                          std::span<const std::size_t> changed) {
  std::vector<Sentence> sub;
  for (const auto i : changed) sub.push_back(sentences[i]);
  const auto bt = back_translate(t2s, sub);
  std::map<std::size_t, std::string> out;
  for (const auto i : changed) out[i] = "";
  for (std::size_t k = 0; k < bt.pairs.size(); ++k) out[changed[bt.source_index[k]]] = join(bt.pairs[k].src.tokens);
  return out;
}

// ---------------------------------------------------------------------------
// stages

void run_filter(Ctx& c) {
  const auto& cfg = c.cfg;
  const auto pairs = read_parallel(cfg.train_src, cfg.train_tgt, cfg.src_lang, cfg.tgt_lang);
  // Scorers are trained on the rule-filtered data so that junk pairs do not
  // shape the models that judge them.
  SelectionConfig rules = cfg.select_parallel;
  rules.lm_percentile_cut = rules.align_percentile_cut = rules.t2s_percentile_cut = 0.0;
  const auto clean = select_parallel(pairs, rules, {}).retained;
  if (clean.empty()) throw Error("no parallel pair survives the rule filter");

  const auto lm = NgramLm::train(targets_of(clean), cfg.lm);
  const auto m1 = ibm1_train(clean, cfg.ibm1_iters);
  const auto m2 = ibm2_train(clean, cfg.ibm2_iters, m1.lexicon);
  std::optional<TranslatorSpec> t2s;
  if (cfg.select_parallel.t2s_percentile_cut > 0.0) {
    t2s = toy_train(clean, toy_options(cfg, Direction::t2s, Orientation::l2r, "filter_t2s"));
  }
  const auto sel = select_parallel(pairs, cfg.select_parallel,
                                   {&lm, &m2.lexicon, &m2.distortion, t2s ? &*t2s : nullptr});
  write_scored_pairs(c.path("filter/train.jsonl"), sel.retained);

  std::vector<Sentence> mono;
  for (const auto& line : read_lines(cfg.mono)) mono.push_back(tokenize(line, cfg.tgt_lang));
  const auto ms = select_mono(mono, cfg.select_mono, &lm);
  write_tokenized(c.path("filter/mono.txt"), ms.retained);
  write_doubles(c.path("filter/mono.scores"), ms.lm_scores);

  json report;
  report["parallel"] = json::parse(sel.report.to_json());
  report["mono"] = json::parse(ms.report.to_json());
  write_json(c.path("filter/report.json"), report);
  c.rec.counts["parallel_in"] = pairs.size();
  c.rec.counts["parallel_kept"] = sel.retained.size();
  c.rec.counts["mono_in"] = mono.size();
  c.rec.counts["mono_kept"] = ms.retained.size();
}

void run_preprocess(Ctx& c) {
  const auto& cfg = c.cfg;
  const auto train = read_scored_pairs(c.path("filter/train.jsonl"));
  const auto mono = read_tokenized(c.path("filter/mono.txt"), cfg.tgt_lang);
  const auto src = sources_of(train);
  auto tgt = targets_of(train);
  const std::size_t n_train = tgt.size();
  tgt.insert(tgt.end(), mono.begin(), mono.end());

  const auto tcs = train_truecaser(src);
  const auto tct = train_truecaser(tgt);
  auto truecase_all = [](const TruecaseModel& m, std::vector<Sentence> xs) {
    parallel_for(xs.size(), [&](std::size_t i) { xs[i] = apply_truecase(m, xs[i]); });
    return xs;
  };
  const auto src_tc = truecase_all(tcs, src);
  const auto tgt_tc = truecase_all(tct, tgt);
  const auto bs = bpe_learn(src_tc, cfg.bpe_ops);
  const auto bt = bpe_learn(tgt_tc, cfg.bpe_ops);
  auto segment_all = [](const BpeModel& m, std::span<const Sentence> xs) {
    std::vector<Sentence> out(xs.size());
    parallel_for(xs.size(), [&](std::size_t i) { out[i] = bpe_apply(m, xs[i]); });
    return out;
  };
  const auto src_seg = segment_all(bs, src_tc);
  const auto tgt_seg = segment_all(bt, tgt_tc);
  write_tokenized(c.path("prep/train.src"), src_seg);
  write_tokenized(c.path("prep/train.tgt"), std::span(tgt_seg).first(n_train));
  write_tokenized(c.path("prep/mono.tgt"), std::span(tgt_seg).subspan(n_train));

  const std::pair<std::string, fs::path> sets[] = {{"dev", cfg.dev_src}, {"test", cfg.test_src}};
  for (const auto& [name, file] : sets) {
    std::vector<Sentence> tok;
    for (const auto& line : read_lines(file)) tok.push_back(tokenize(line, cfg.src_lang));
    write_tokenized(c.path("prep/" + name + ".tok"), tok);
    write_tokenized(c.path("prep/" + name + ".src"), segment_all(bs, truecase_all(tcs, tok)));
    c.rec.counts[name] = tok.size();
  }
  tcs.save(c.path("prep/truecase.src"));
  tct.save(c.path("prep/truecase.tgt"));
  bs.save(c.path("prep/bpe.src"));
  bt.save(c.path("prep/bpe.tgt"));
  c.rec.counts["bpe_src_merges"] = bs.num_operations();
  c.rec.counts["bpe_tgt_merges"] = bt.num_operations();
}

void run_base_models(Ctx& c) {
  const auto& cfg = c.cfg;
  const auto pairs = read_pair_files(c.path("prep/train.src"), c.path("prep/train.tgt"), cfg.src_lang, cfg.tgt_lang);
  toy_train(pairs, toy_options(cfg, Direction::s2t, Orientation::l2r, "base")).save(c.path("models/base"));
  toy_train(pairs, toy_options(cfg, Direction::t2s, Orientation::l2r, "t2s")).save(c.path("models/t2s"));
  const auto m1 = ibm1_train(pairs, cfg.ibm1_iters);
  const auto m2 = ibm2_train(pairs, cfg.ibm2_iters, m1.lexicon);
  m2.lexicon.save(c.path("align/lexicon.txt"));
  m2.distortion.save(c.path("align/distortion.txt"));
  auto tgt = targets_of(pairs);
  const auto mono = read_tokenized(c.path("prep/mono.tgt"), cfg.tgt_lang);
  tgt.insert(tgt.end(), mono.begin(), mono.end());
  NgramLm::train(tgt, cfg.lm).save(c.path("lm/target.lm"));
  c.rec.counts["train_pairs"] = pairs.size();
}

void run_backtranslate(Ctx& c) {
  const auto& cfg = c.cfg;
  const auto mono = read_tokenized(c.path("prep/mono.tgt"), cfg.tgt_lang);
  const ToyTranslator t2s(TranslatorSpec::load(c.path("models/t2s")));
  const auto bt = back_translate(t2s, mono);
  std::vector<std::string> lines(mono.size());
  for (std::size_t k = 0; k < bt.pairs.size(); ++k) lines[bt.source_index[k]] = join(bt.pairs[k].src.tokens);
  write_lines(c.path("synth/bt.src"), lines);
  const auto kept = filter_synthetic(cfg, bt.pairs);
  write_scored_pairs(c.path("synth/synthetic.jsonl"), kept);
  c.rec.counts["mono"] = mono.size();
  c.rec.counts["skipped"] = bt.skipped;
  c.rec.counts["synthetic_kept"] = kept.size();
}

void run_cycle(Ctx& c) {
  const auto& cfg = c.cfg;
  const auto mono = read_tokenized(c.path("prep/mono.tgt"), cfg.tgt_lang);
  const auto scores = read_doubles(c.path("filter/mono.scores"));
  const ToyTranslator t2s(TranslatorSpec::load(c.path("models/t2s")));
  const ToyTranslator s2t(TranslatorSpec::load(c.path("models/base")));
  const auto ct = cycle_translate(t2s, s2t, mono, scores, {cfg.cycle_ratio});
  write_tokenized(c.path("cycle/mono.tgt"), ct.sentences);
  std::vector<std::string> flags;
  for (const bool b : ct.cycled) flags.emplace_back(b ? "1" : "0");
  write_lines(c.path("cycle/cycled.txt"), flags);

  // Only rewritten sentences need a fresh back translation.
  auto lines = read_lines(c.path("synth/bt.src"));
  if (lines.size() != mono.size()) throw FormatError("synth/bt.src does not match the monolingual data");
  std::vector<std::size_t> changed;
  for (std::size_t i = 0; i < mono.size(); ++i) {
    if (ct.cycled[i] && ct.sentences[i].tokens != mono[i].tokens) changed.push_back(i);
  }
  for (const auto& [i, line] : back_translate_changed(t2s, ct.sentences, changed)) lines[i] = line;
  write_lines(c.path("cycle/bt.src"), lines);
  const auto kept = filter_synthetic(cfg, synthetic_pairs(ct.sentences, lines, ct.cycled, cfg));
  write_scored_pairs(c.path("cycle/synthetic.jsonl"), kept);
  c.rec.counts["cycled"] = static_cast<std::size_t>(std::count(ct.cycled.begin(), ct.cycled.end(), true));
  c.rec.counts["changed"] = changed.size();
  c.rec.counts["skipped"] = ct.skipped;
  c.rec.counts["synthetic_kept"] = kept.size();
}

void run_construct(Ctx& c) {
  const auto& cfg = c.cfg;
  const auto parallel = read_pair_files(c.path("prep/train.src"), c.path("prep/train.tgt"), cfg.src_lang, cfg.tgt_lang);
  const auto cycled = read_scored_pairs(c.path("cycle/synthetic.jsonl"));
  const auto plain = read_scored_pairs(c.path("synth/synthetic.jsonl"));
  const auto names = small_names(cfg);
  const auto smalls = construct_small(parallel, cycled, cfg.plan);
  for (std::size_t k = 0; k < smalls.size(); ++k) {
    write_scored_pairs(c.path("construct/" + names[k] + ".jsonl"), smalls[k]);
    c.rec.counts[names[k]] = smalls[k].size();
    c.rec.seeds[names[k]] = mix_seed(cfg.plan.seed, k);
  }
  const auto big = construct_big(parallel, cycled, cfg.plan);
  write_scored_pairs(c.path("construct/big.jsonl"), big);
  const auto big_plain = construct_big(parallel, plain, cfg.plan);
  write_scored_pairs(c.path("construct/big_nocycle.jsonl"), big_plain);
  c.rec.seeds["plan"] = cfg.plan.seed;
  c.rec.counts["big"] = big.size();
  c.rec.counts["big_nocycle"] = big_plain.size();
}

struct TrainJob {
  std::string model;
  std::string corpus;
  Direction direction;
  Orientation orientation;
};

std::vector<TrainJob> train_jobs(const PipelineConfig& cfg) {
  std::vector<TrainJob> jobs{{"synthetic", "big_nocycle", Direction::s2t, Orientation::l2r}};
  for (const auto& s : small_names(cfg)) jobs.push_back({s, s, Direction::s2t, Orientation::l2r});
  jobs.push_back({"big", "big", Direction::s2t, Orientation::l2r});
  jobs.push_back({"r2l", "big", Direction::s2t, Orientation::r2l});
  jobs.push_back({"t2s_big", "big", Direction::t2s, Orientation::l2r});
  return jobs;
}

void run_train(Ctx& c) {
  for (const auto& job : train_jobs(c.cfg)) {
    const auto pairs = read_scored_pairs(c.path("construct/" + job.corpus + ".jsonl"));
    toy_train(pairs, toy_options(c.cfg, job.direction, job.orientation, job.model)).save(c.path("models/" + job.model));
    c.rec.counts[job.model] = pairs.size();
  }
}

void run_decode(Ctx& c) {
  for (const auto& set : eval_sets()) {
    const auto sources = read_tokenized(c.path("prep/" + set + ".src"), c.cfg.src_lang);
    for (const auto& sys : decoded_names(c.cfg)) {
      const auto spec = TranslatorSpec::load(c.path("models/" + sys));
      write_nbest(c.path("decode/" + sys + "." + set + ".jsonl"), decode_all(spec, sources, c.cfg.nbest));
    }
  }
}

void run_rerank(Ctx& c) {
  const auto& cfg = c.cfg;
  const auto refs = read_lines(cfg.dev_ref);
  const auto tct = TruecaseModel::load(c.path("prep/truecase.tgt"));
  const auto big = TranslatorSpec::load(c.path("models/big"));
  const auto r2l = TranslatorSpec::load(c.path("models/r2l"));
  const auto t2s = TranslatorSpec::load(c.path("models/t2s_big"));
  const auto lm = NgramLm::load(c.path("lm/target.lm"));
  const auto lex = LexiconTable::load(c.path("align/lexicon.txt"));
  const auto dist = DistortionTable::load(c.path("align/distortion.txt"));

  for (const auto& sys : pool_names(cfg)) {
    // The R2L system's own left-to-right score comes from the model it was
    // trained alongside.
    const auto own = sys == "r2l" ? big : TranslatorSpec::load(c.path("models/" + sys));
    const FeatureScorers scorers{&own, &r2l, &t2s, &lm, &lex, &dist, cfg.select_parallel.optimal_ratio};
    std::map<std::string, std::vector<NBestList>> lists;
    for (const auto& set : eval_sets()) {
      auto& l = lists[set];
      l = read_nbest(c.path("decode/" + sys + "." + set + ".jsonl"));
      for (auto& nb : l) extract_features(nb, scorers);
    }
    const auto& dev = lists["dev"];
    for (const auto& l : dev) {
      if (l.sent_id >= refs.size()) throw FormatError("dev n-best has more sentences than the reference");
    }
    std::unordered_map<std::string, double> cache;
    const GainFn gain = [&](std::size_t list, const Hypothesis& h) {
      const std::string key = std::to_string(list) + "\t" + join(h.tokens);
      const auto it = cache.find(key);
      if (it != cache.end()) return it->second;
      const double g = bleu_sentence(finalize(make_sentence(h.tokens), tct), refs[dev[list].sent_id]);
      cache.emplace(key, g);
      return g;
    };
    const auto model = mira_train(dev, gain, cfg.mira);
    model.save(c.path("rerank/" + sys + ".weights"));
    for (const auto& set : eval_sets()) {
      auto& l = lists[set];
      for (auto& nb : l) nb = rerank_apply(model, std::move(nb));
      write_nbest(c.path("rerank/" + sys + "." + set + ".jsonl"), l);
    }
  }
  c.rec.seeds["mira"] = cfg.mira.seed;
}

SystemPool reranked_pool(const Ctx& c, const std::string& set, std::size_t sentences) {
  SystemPool pool;
  for (const auto& sys : pool_names(c.cfg)) {
    pool.systems[sys] = best_tokens(read_nbest(c.path("rerank/" + sys + "." + set + ".jsonl")), sentences);
  }
  return pool;
}

void run_combine(Ctx& c) {
  const auto& cfg = c.cfg;
  const auto tct = TruecaseModel::load(c.path("prep/truecase.tgt"));
  const auto refs = read_lines(cfg.dev_ref);
  const auto dev_pool = reranked_pool(c, "dev", refs.size());
  const auto metric = [&](const std::vector<Tokens>& hyps) { return dev_bleu(hyps, tct, refs); };
  const auto g = gmse(dev_pool, metric);

  for (const auto& set : eval_sets()) {
    const std::size_t n = set == "dev" ? refs.size() : read_lines(cfg.test_ref).size();
    const auto pool = set == "dev" ? dev_pool : reranked_pool(c, set, n);
    const auto combined = combine_pool(pool, g.selection);
    std::ofstream out(c.path("combine/" + set + ".jsonl"), std::ios::binary);
    if (!out) throw Error("cannot write combine output");
    for (std::size_t i = 0; i < combined.size(); ++i) {
      json j;
      j["sent_id"] = i;
      j["tokens"] = combined[i].tokens;
      j["selected"] = g.selection[combined[i].selected];
      j["backbone"] = combined[i].network.backbone_id;
      out << j.dump() << '\n';
    }
  }
  json trace;
  trace["selection"] = g.selection;
  trace["score"] = g.score;
  trace["steps"] = json::array();
  for (const auto& step : g.trace) trace["steps"].push_back({{"selection", step.selection}, {"score", step.score}});
  write_json(c.path("combine/trace.json"), trace);
  c.rec.counts["selected_systems"] = g.selection.size();
}

std::vector<Tokens> read_combined(const fs::path& path) {
  std::vector<Tokens> out;
  for (const auto& line : read_lines(path)) {
    if (line.empty()) continue;
    const auto j = json::parse(line);
    out.push_back(j.at("tokens").get<Tokens>());
  }
  return out;
}

void run_postprocess(Ctx& c) {
  const auto tct = TruecaseModel::load(c.path("prep/truecase.tgt"));
  for (const auto& set : eval_sets()) {
    const auto hyps = read_combined(c.path("combine/" + set + ".jsonl"));
    const auto src = read_tokenized(c.path("prep/" + set + ".tok"), c.cfg.src_lang);
    if (src.size() != hyps.size()) throw FormatError("combined output and source differ in length");
    std::vector<std::string> out(hyps.size());
    std::vector<int> repaired(hyps.size(), 0);
    parallel_for(hyps.size(), [&](std::size_t i) {
      const RepairFn repair = [&](const Sentence& s) {
        auto r = repair_numbers(src[i], s);
        repaired[i] = r.tokens != s.tokens;
        return r;
      };
      out[i] = finalize(make_sentence(hyps[i]), tct, repair);
    });
    write_lines(c.path("post/" + set + ".txt"), out);
    c.rec.counts[set + "_repaired"] = static_cast<std::size_t>(std::count(repaired.begin(), repaired.end(), 1));
  }
}

void run_report(Ctx& c) {
  const auto& cfg = c.cfg;
  const auto tct = TruecaseModel::load(c.path("prep/truecase.tgt"));
  json report;
  for (const auto& set : eval_sets()) {
    const auto refs = read_lines(set == "dev" ? cfg.dev_ref : cfg.test_ref);
    const auto n = refs.size();
    const auto nbest_bleu = [&](const std::string& file) {
      return dev_bleu(best_tokens(read_nbest(c.path(file)), n), tct, refs);
    };
    json row;
    row["baseline"] = nbest_bleu("decode/base." + set + ".jsonl");
    row["synthetic"] = nbest_bleu("decode/synthetic." + set + ".jsonl");
    row["cycle"] = nbest_bleu("decode/big." + set + ".jsonl");
    row["rerank"] = nbest_bleu("rerank/big." + set + ".jsonl");
    row["combination"] = dev_bleu(read_combined(c.path("combine/" + set + ".jsonl")), tct, refs);
    row["post"] = bleu_corpus(read_lines(c.path("post/" + set + ".txt")), refs).bleu;
    report[set] = row;
  }
  report["gmse_selection"] = json::parse(read_text(c.path("combine/trace.json"))).at("selection");
  write_json(c.path("report.json"), report);
}

std::vector<Stage> make_stages(const PipelineConfig& cfg) {
  const auto model_inputs = [](std::initializer_list<std::string> names) {
    std::vector<std::string> out;
    for (const auto& n : names) {
      for (auto& f : model_files(n)) out.push_back(std::move(f));
    }
    return out;
  };
  const auto append = [](std::vector<std::string> a, const std::vector<std::string>& b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
  };
  const auto smalls = small_names(cfg);
  const auto pool = pool_names(cfg);
  const auto decoded = decoded_names(cfg);

  std::vector<Stage> stages;
  stages.push_back({"filter",
                    {"lang.", "select.parallel.", "select.mono.", "lm.", "align.", "mt."},
                    {"data.train_src", "data.train_tgt", "data.mono"},
                    {"filter/train.jsonl", "filter/mono.txt", "filter/mono.scores", "filter/report.json"},
                    run_filter});
  stages.push_back({"preprocess",
                    {"lang.", "bpe."},
                    {"filter/train.jsonl", "filter/mono.txt", "data.dev_src", "data.test_src"},
                    {"prep/train.src", "prep/train.tgt", "prep/mono.tgt", "prep/dev.tok", "prep/dev.src",
                     "prep/test.tok", "prep/test.src", "prep/truecase.src", "prep/truecase.tgt", "prep/bpe.src",
                     "prep/bpe.tgt"},
                    run_preprocess});
  stages.push_back({"base_models",
                    {"lm.", "align.", "mt."},
                    {"prep/train.src", "prep/train.tgt", "prep/mono.tgt"},
                    append(model_inputs({"base", "t2s"}), {"align/lexicon.txt", "align/distortion.txt", "lm/target.lm"}),
                    run_base_models});
  stages.push_back({"backtranslate",
                    {"mt.", "select.synthetic."},
                    append(model_inputs({"t2s"}), {"prep/mono.tgt", "align/lexicon.txt", "align/distortion.txt"}),
                    {"synth/bt.src", "synth/synthetic.jsonl"},
                    run_backtranslate});
  stages.push_back({"cycle",
                    {"cycle.", "mt.", "select.synthetic."},
                    append(model_inputs({"t2s", "base"}), {"prep/mono.tgt", "filter/mono.scores", "synth/bt.src",
                                                            "align/lexicon.txt", "align/distortion.txt"}),
                    {"cycle/mono.tgt", "cycle/cycled.txt", "cycle/bt.src", "cycle/synthetic.jsonl"},
                    run_cycle});
  std::vector<std::string> construct_out;
  for (const auto& s : smalls) construct_out.push_back("construct/" + s + ".jsonl");
  construct_out.push_back("construct/big.jsonl");
  construct_out.push_back("construct/big_nocycle.jsonl");
  stages.push_back({"construct",
                    {"construct."},
                    {"prep/train.src", "prep/train.tgt", "cycle/synthetic.jsonl", "synth/synthetic.jsonl"},
                    construct_out,
                    run_construct});
  std::vector<std::string> train_out;
  for (const auto& job : train_jobs(cfg)) train_out = append(train_out, model_files(job.model));
  stages.push_back({"train", {"lm.", "align.", "mt."}, construct_out, train_out, run_train});
  std::vector<std::string> decode_in{"prep/dev.src", "prep/test.src"}, decode_out;
  for (const auto& sys : decoded) {
    decode_in = append(decode_in, model_files(sys));
    for (const auto& set : eval_sets()) decode_out.push_back("decode/" + sys + "." + set + ".jsonl");
  }
  stages.push_back({"decode", {"mt."}, decode_in, decode_out, run_decode});
  std::vector<std::string> rerank_in = append(model_inputs({"big", "r2l", "t2s_big"}),
                                              {"lm/target.lm", "align/lexicon.txt", "align/distortion.txt",
                                               "prep/truecase.tgt", "data.dev_ref"});
  std::vector<std::string> rerank_out;
  for (const auto& sys : pool) {
    if (sys != "big" && sys != "r2l") rerank_in = append(rerank_in, model_files(sys));
    rerank_out.push_back("rerank/" + sys + ".weights");
    for (const auto& set : eval_sets()) {
      rerank_in.push_back("decode/" + sys + "." + set + ".jsonl");
      rerank_out.push_back("rerank/" + sys + "." + set + ".jsonl");
    }
  }
  stages.push_back({"rerank", {"rerank.", "select.parallel.optimal_ratio"}, rerank_in, rerank_out, run_rerank});
  std::vector<std::string> combine_in{"prep/truecase.tgt", "data.dev_ref", "data.test_ref"};
  for (const auto& sys : pool) {
    for (const auto& set : eval_sets()) combine_in.push_back("rerank/" + sys + "." + set + ".jsonl");
  }
  stages.push_back({"combine",
                    {},
                    combine_in,
                    {"combine/dev.jsonl", "combine/test.jsonl", "combine/trace.json"},
                    run_combine});
  stages.push_back({"postprocess",
                    {},
                    {"combine/dev.jsonl", "combine/test.jsonl", "prep/dev.tok", "prep/test.tok", "prep/truecase.tgt"},
                    {"post/dev.txt", "post/test.txt"},
                    run_postprocess});
  stages.push_back({"report",
                    {},
                    {"decode/base.dev.jsonl", "decode/base.test.jsonl", "decode/synthetic.dev.jsonl",
                     "decode/synthetic.test.jsonl", "decode/big.dev.jsonl", "decode/big.test.jsonl",
                     "rerank/big.dev.jsonl", "rerank/big.test.jsonl", "combine/dev.jsonl", "combine/test.jsonl",
                     "combine/trace.json", "post/dev.txt", "post/test.txt", "prep/truecase.tgt", "data.dev_ref",
                     "data.test_ref"},
                    {"report.json"},
                    run_report});
  return stages;
}

json record_to_json(const StageRecord& r) {
  json j;
  j["name"] = r.name;
  j["config_digest"] = r.config_digest;
  j["inputs"] = r.inputs;
  j["outputs"] = r.outputs;
  j["seeds"] = r.seeds;
  j["counts"] = r.counts;
  if (r.planned) j["planned"] = true;
  return j;
}

StageRecord record_from_json(const nlohmann::json& j) {
  StageRecord r;
  r.name = j.at("name").get<std::string>();
  r.config_digest = j.at("config_digest").get<std::string>();
  r.inputs = j.at("inputs").get<std::map<std::string, std::string>>();
  r.outputs = j.at("outputs").get<std::map<std::string, std::string>>();
  r.seeds = j.value("seeds", std::map<std::string, std::uint64_t>{});
  r.counts = j.value("counts", std::map<std::string, std::size_t>{});
  r.planned = j.value("planned", false);
  return r;
}

std::string file_digest_or_empty(const fs::path& path) {
  return fs::is_regular_file(path) ? sha256_file(path) : std::string{};
}

bool still_valid(const StageRecord& prev, const StageRecord& now, const fs::path& work) {
  if (prev.planned || prev.config_digest != now.config_digest || prev.inputs != now.inputs) return false;
  return std::all_of(prev.outputs.begin(), prev.outputs.end(), [&](const auto& kv) {
    return file_digest_or_empty(work / kv.first) == kv.second;
  });
}


void check_ratios(std::span<const double> ratios) {
  if (ratios.empty()) throw Error("no ablation ratios");
  std::set<double> seen;
  for (const double r : ratios) {
    if (!(r >= 0.0 && r <= 1.0)) throw Error("ablation ratios must lie in [0,1]");
    if (!seen.insert(r).second) throw Error("ablation ratios must be distinct");
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// config

PipelineConfig PipelineConfig::from_config(const Config& cfg, const fs::path& base_dir) {
  PipelineConfig p;
  const auto path_of = [&](std::string_view key) -> fs::path {
    const auto v = cfg.get(key, "");
    if (v.empty()) return {};
    const fs::path f(v);
    return f.is_absolute() ? f : base_dir / f;
  };
  for (const auto& [key, member] : data_keys()) p.*member = path_of(key);
  p.work_dir = path_of("run.dir");
  p.workers = cfg.get_size("run.workers", p.workers);
  p.src_lang = cfg.get("lang.src", p.src_lang);
  p.tgt_lang = cfg.get("lang.tgt", p.tgt_lang);
  p.select_parallel = SelectionConfig::from_config(cfg.scoped("select.parallel."));
  p.select_mono = SelectionConfig::from_config(cfg.scoped("select.mono."));
  p.select_synthetic = SelectionConfig::from_config(cfg.scoped("select.synthetic."));
  p.bpe_ops = cfg.get_size("bpe.ops", p.bpe_ops);
  p.lm.order = static_cast<int>(cfg.get_int("lm.order", p.lm.order));
  p.lm.k = cfg.get_double("lm.k", p.lm.k);
  p.lm.lambdas = cfg.get_doubles("lm.lambdas", {});
  p.ibm1_iters = cfg.get_size("align.ibm1_iters", p.ibm1_iters);
  p.ibm2_iters = cfg.get_size("align.ibm2_iters", p.ibm2_iters);
  p.weights.lex = cfg.get_double("mt.weight_lex", p.weights.lex);
  p.weights.lm = cfg.get_double("mt.weight_lm", p.weights.lm);
  p.weights.len = cfg.get_double("mt.weight_len", p.weights.len);
  p.beam = cfg.get_size("mt.beam", p.beam);
  p.fanout = cfg.get_size("mt.fanout", p.fanout);
  p.nbest = cfg.get_size("mt.nbest", p.nbest);
  p.cycle_ratio = cfg.get_double("cycle.ratio", p.cycle_ratio);
  p.plan.num_small_samples = cfg.get_size("construct.num_small", p.plan.num_small_samples);
  p.plan.parallel_repeat = cfg.get_size("construct.repeat", p.plan.parallel_repeat);
  p.plan.seed = static_cast<std::uint64_t>(cfg.get_int("construct.seed", static_cast<long long>(p.plan.seed)));
  p.mira.C = cfg.get_double("rerank.C", p.mira.C);
  p.mira.epochs = cfg.get_size("rerank.epochs", p.mira.epochs);
  p.mira.seed = static_cast<std::uint64_t>(cfg.get_int("rerank.seed", static_cast<long long>(p.mira.seed)));
  p.ablation_ratios = cfg.get_doubles("ablation.ratios", p.ablation_ratios);
  p.source = cfg;
  return p;
}

PipelineConfig PipelineConfig::load(const fs::path& path) {
  auto p = from_config(Config::load(path), path.parent_path());
  p.validate();
  return p;
}

void PipelineConfig::validate() const {
  for (const auto& [key, member] : data_keys()) {
    if ((this->*member).empty()) throw Error("missing config key " + key);
  }
  if (work_dir.empty()) throw Error("missing config key run.dir");
  select_parallel.validate();
  select_mono.validate();
  select_synthetic.validate();
  if (select_synthetic.lm_percentile_cut > 0.0 || select_synthetic.t2s_percentile_cut > 0.0) {
    throw Error("select.synthetic supports only the alignment cut");
  }
  if (lm.order < 1) throw Error("lm.order must be at least 1");
  if (!lm.lambdas.empty() && lm.lambdas.size() != static_cast<std::size_t>(lm.order)) {
    throw Error("lm.lambdas needs one weight per order");
  }
  if (beam == 0 || fanout == 0 || nbest == 0) throw Error("mt.beam, mt.fanout and mt.nbest must be positive");
  if (nbest > beam) throw Error("mt.nbest cannot exceed mt.beam");
  if (!(cycle_ratio >= 0.0 && cycle_ratio <= 1.0)) throw Error("cycle.ratio must lie in [0,1]");
  if (plan.num_small_samples == 0) throw Error("construct.num_small must be positive");
  if (plan.parallel_repeat == 0) throw Error("construct.repeat must be positive");
  if (!(mira.C > 0.0)) throw Error("rerank.C must be positive");
  check_ratios(ablation_ratios);
}

// ---------------------------------------------------------------------------
// manifest

const StageRecord* PipelineManifest::find(std::string_view stage) const {
  const auto it = std::find_if(stages.begin(), stages.end(), [&](const StageRecord& r) { return r.name == stage; });
  return it == stages.end() ? nullptr : &*it;
}

std::string PipelineManifest::to_json() const {
  json j;
  j["stages"] = json::array();
  for (const auto& r : stages) j["stages"].push_back(record_to_json(r));
  return j.dump(2) + "\n";
}

PipelineManifest PipelineManifest::from_json(std::string_view text) {
  try {
    const auto j = nlohmann::json::parse(text);
    PipelineManifest m;
    for (const auto& r : j.at("stages")) m.stages.push_back(record_from_json(r));
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad manifest: ") + e.what());
  }
}

PipelineManifest PipelineManifest::load(const fs::path& path) { return from_json(read_text(path)); }

void PipelineManifest::save(const fs::path& path) const { write_text(path, to_json()); }

const std::vector<std::string>& pipeline_stages() {
  static const std::vector<std::string> names{"filter",    "preprocess", "base_models", "backtranslate",
                                              "cycle",     "construct",  "train",       "decode",
                                              "rerank",    "combine",    "postprocess", "report"};
  return names;
}

const std::vector<std::string>& ladder_stages() {
  static const std::vector<std::string> names{"baseline", "synthetic", "cycle", "rerank", "combination", "post"};
  return names;
}

// ---------------------------------------------------------------------------
// runner

PipelineManifest run_pipeline(const PipelineConfig& cfg, const RunOptions& options) {
  cfg.validate();
  if (!options.until.empty()) {
    const auto& names = pipeline_stages();
    if (std::find(names.begin(), names.end(), options.until) == names.end()) {
      throw Error("unknown stage '" + options.until + "'");
    }
  }
  if (cfg.workers > 0) set_worker_count(cfg.workers);
  const auto stages = make_stages(cfg);
  const fs::path manifest_path = cfg.work_dir / "manifest.json";
  const fs::path timings_path = cfg.work_dir / "timings.json";

  PipelineManifest previous;
  json timings = json::object();
  if (options.resume && fs::exists(manifest_path)) previous = PipelineManifest::load(manifest_path);
  if (options.resume && !options.dry_run && fs::exists(timings_path)) timings = json::parse(read_text(timings_path));
  if (!options.dry_run) fs::create_directories(cfg.work_dir);

  PipelineManifest manifest;
  bool stopped = false;
  for (const auto& stage : stages) {
    if (stopped) {
      // Stages past `until` keep their old entries; a later resume checks them.
      if (const auto* old = previous.find(stage.name)) manifest.stages.push_back(*old);
      continue;
    }
    StageRecord rec;
    rec.name = stage.name;
    rec.config_digest = config_digest(cfg.source, stage.config_prefixes);
    for (const auto& in : stage.inputs) {
      const auto path = resolve_input(cfg, in);
      rec.inputs[in] = file_digest_or_empty(path);
      if (!options.dry_run && rec.inputs[in].empty()) {
        throw Error("stage " + stage.name + ": missing input " + path.string());
      }
    }
    stopped = stage.name == options.until;

    if (options.dry_run) {
      for (const auto& out : stage.outputs) rec.outputs[out] = "";
      rec.planned = true;
      manifest.stages.push_back(std::move(rec));
      continue;
    }
    if (const auto* old = previous.find(stage.name); options.resume && old && still_valid(*old, rec, cfg.work_dir)) {
      manifest.stages.push_back(*old);
      manifest.save(manifest_path);
      continue;
    }

    for (const auto& out : stage.outputs) fs::create_directories((cfg.work_dir / out).parent_path());
    const auto start = std::chrono::steady_clock::now();
    Ctx ctx{cfg, rec};
    try {
      stage.run(ctx);
    } catch (const std::exception& e) {
      throw Error("stage " + stage.name + ": " + e.what());
    }
    for (const auto& out : stage.outputs) {
      rec.outputs[out] = file_digest_or_empty(cfg.work_dir / out);
      if (rec.outputs[out].empty()) throw Error("stage " + stage.name + ": did not write " + out);
    }
    timings[stage.name] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    manifest.stages.push_back(std::move(rec));
    manifest.save(manifest_path);
    write_json(timings_path, timings);
  }
  if (!options.dry_run) manifest.save(manifest_path);
  return manifest;
}

LadderReport LadderReport::load(const fs::path& path) {
  try {
    const auto j = nlohmann::json::parse(read_text(path));
    LadderReport r;
    r.dev = j.at("dev").get<std::map<std::string, double>>();
    r.test = j.at("test").get<std::map<std::string, double>>();
    r.gmse_selection = j.at("gmse_selection").get<std::vector<std::string>>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// ablation

std::vector<AblationRow> run_ablation(const PipelineConfig& cfg, std::span<const double> ratios) {
  check_ratios(ratios);
  RunOptions upstream;
  upstream.resume = true;
  upstream.until = "backtranslate";
  run_pipeline(cfg, upstream);

  const auto work = [&](const std::string& rel) { return cfg.work_dir / rel; };
  const auto mono = read_tokenized(work("prep/mono.tgt"), cfg.tgt_lang);
  const auto scores = read_doubles(work("filter/mono.scores"));
  const auto base_bt = read_lines(work("synth/bt.src"));
  if (scores.size() != mono.size() || base_bt.size() != mono.size()) {
    throw FormatError("monolingual files in " + cfg.work_dir.string() + " disagree in length");
  }
  const ToyTranslator t2s(TranslatorSpec::load(work("models/t2s")));
  const ToyTranslator s2t(TranslatorSpec::load(work("models/base")));
  const auto dev = read_tokenized(work("prep/dev.src"), cfg.src_lang);
  const auto refs = read_lines(cfg.dev_ref);
  const auto tct = TruecaseModel::load(work("prep/truecase.tgt"));

  // Lower ratios select a prefix of the largest ratio's sentences, so one
  // cycle pass and one back translation of its output serve every row.
  const double top = *std::max_element(ratios.begin(), ratios.end());
  const auto ct = cycle_translate(t2s, s2t, mono, scores, {top});
  std::vector<std::size_t> changed;
  for (std::size_t i = 0; i < mono.size(); ++i) {
    if (ct.cycled[i] && ct.sentences[i].tokens != mono[i].tokens) changed.push_back(i);
  }
  const auto cycled_bt = back_translate_changed(t2s, ct.sentences, changed);

  std::vector<AblationRow> rows;
  json jrows = json::array();
  for (const double r : ratios) {
    std::vector<bool> cycled(mono.size(), false);
    auto sentences = mono;
    auto bt = base_bt;
    for (const auto i : cycle_selection(scores, r)) {
      if (!ct.cycled[i]) continue;
      cycled[i] = true;
      sentences[i] = ct.sentences[i];
      if (const auto it = cycled_bt.find(i); it != cycled_bt.end()) bt[i] = it->second;
    }
    const auto kept = filter_synthetic(cfg, synthetic_pairs(sentences, bt, cycled, cfg));
    const auto spec = toy_train(kept, toy_options(cfg, Direction::s2t, Orientation::l2r, "ablation"));
    AblationRow row;
    row.ratio = r;
    row.dev_bleu = dev_bleu(best_tokens(decode_all(spec, dev, 1), refs.size()), tct, refs);
    row.cycled = static_cast<std::size_t>(std::count(cycled.begin(), cycled.end(), true));
    row.synthetic_pairs = kept.size();
    rows.push_back(row);
    jrows.push_back({{"ratio", row.ratio},
                     {"dev_bleu", row.dev_bleu},
                     {"cycled", row.cycled},
                     {"synthetic_pairs", row.synthetic_pairs}});
  }
  const auto best = std::max_element(rows.begin(), rows.end(),
                                     [](const AblationRow& a, const AblationRow& b) { return a.dev_bleu < b.dev_bleu; });
  json report;
  report["rows"] = jrows;
  report["best_ratio"] = best->ratio;
  fs::create_directories(work("ablation"));
  write_json(work("ablation/report.json"), report);
  return rows;
}

}  // namespace cyclemt
