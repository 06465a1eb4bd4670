// cyclemt command-line tool: one subcommand per module plus the pipeline.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cyclemt/align.hpp"
#include "cyclemt/augment.hpp"
#include "cyclemt/cipher.hpp"
#include "cyclemt/combine.hpp"
#include "cyclemt/config.hpp"
#include "cyclemt/corpus.hpp"
#include "cyclemt/dataselect.hpp"
#include "cyclemt/digest.hpp"
#include "cyclemt/error.hpp"
#include "cyclemt/metrics.hpp"
#include "cyclemt/ngram_lm.hpp"
#include "cyclemt/parallel.hpp"
#include "cyclemt/pipeline.hpp"
#include "cyclemt/postprocess.hpp"
#include "cyclemt/rerank.hpp"
#include "cyclemt/subword.hpp"
#include "cyclemt/toymt.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace cyclemt;

namespace {

// "-" means stdin / stdout throughout.

std::vector<std::string> input_lines(const std::string& path) {
  if (path != "-") return read_lines(path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(std::cin, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  return lines;
}

class Output {
 public:
  explicit Output(const std::string& path) {
    if (path == "-") return;
    file_ = std::make_unique<std::ofstream>(path, std::ios::binary);
    if (!*file_) throw Error("cannot write " + path);
  }
  std::ostream& operator*() { return file_ ? *file_ : std::cout; }

 private:
  std::unique_ptr<std::ofstream> file_;
};

void output_lines(const std::string& path, const std::vector<std::string>& lines) {
  Output out(path);
  for (const auto& l : lines) *out << l << '\n';
}

void output_json(const std::string& path, const json& j) {
  Output out(path);
  *out << j.dump(2) << '\n';
}

std::vector<Sentence> input_sentences(const std::string& path, const std::string& lang = {}) {
  std::vector<Sentence> out;
  for (const auto& l : input_lines(path)) out.push_back(from_tokenized(l, lang));
  return out;
}

std::vector<std::string> joined(const std::vector<Sentence>& xs) {
  std::vector<std::string> out;
  out.reserve(xs.size());
  for (const auto& s : xs) out.push_back(join(s.tokens));
  return out;
}

std::vector<SentencePair> tokenized_pairs(const std::string& src, const std::string& tgt) {
  const auto s = input_sentences(src);
  const auto t = input_sentences(tgt);
  if (s.size() != t.size()) throw FormatError("source and target files differ in length");
  std::vector<SentencePair> out(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    out[i].src = s[i];
    out[i].tgt = t[i];
  }
  return out;
}

Direction parse_direction(const std::string& s) {
  if (s == "s2t") return Direction::s2t;
  if (s == "t2s") return Direction::t2s;
  throw Error("direction must be s2t or t2s");
}

Orientation parse_orientation(const std::string& s) {
  if (s == "l2r") return Orientation::l2r;
  if (s == "r2l") return Orientation::r2l;
  throw Error("orientation must be l2r or r2l");
}

SelectionConfig selection_from(const std::string& path) {
  return path.empty() ? SelectionConfig{} : SelectionConfig::from_config(Config::load(path));
}

/// Per-system 1-best token lists from JSON-lines {sent_id, tokens}. N-best
/// files are accepted too; only rank 0 is read.
std::vector<Tokens> read_system(const std::string& path) {
  std::map<std::size_t, Tokens> by_id;
  std::size_t line_no = 0;
  for (const auto& line : read_lines(path)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      if (j.value("rank", 0) != 0) continue;
      const auto& t = j.at("tokens");
      by_id[j.at("sent_id").get<std::size_t>()] =
          t.is_string() ? from_tokenized(t.get<std::string>()).tokens : t.get<Tokens>();
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  std::vector<Tokens> out;
  for (auto& [id, toks] : by_id) {
    if (id != out.size()) throw FormatError(path + ": sentence ids must be 0..n-1");
    out.push_back(std::move(toks));
  }
  return out;
}

/// "id=path" arguments.
SystemPool read_pool(const std::vector<std::string>& specs) {
  SystemPool pool;
  for (const auto& spec : specs) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos || eq == 0) throw Error("--system expects id=path, got '" + spec + "'");
    pool.systems[spec.substr(0, eq)] = read_system(spec.substr(eq + 1));
  }
  pool.validate();
  return pool;
}

json bleu_json(const BleuResult& r) {
  json j;
  j["bleu"] = r.bleu;
  j["precisions"] = r.precisions;
  j["bp"] = r.bp;
  j["hyp_len"] = r.hyp_len;
  j["ref_len"] = r.ref_len;
  return j;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Toy statistical MT toolkit with back and cycle translation"};
  app.require_subcommand(1);
  app.add_option_function<std::size_t>(
      "--workers", [](std::size_t n) { set_worker_count(n); },
      "Worker threads (default: CYCLEMT_WORKERS or all cores)");

  std::string in = "-", out = "-";
  auto io = [&](CLI::App* sub) {
    sub->add_option("-i,--input", in, "Input file (- = stdin)");
    sub->add_option("-o,--output", out, "Output file (- = stdout)");
  };

  // --- corpus --------------------------------------------------------------
  std::string lang;
  auto* tok = app.add_subcommand("tokenize", "Raw text to space-separated tokens");
  io(tok);
  tok->add_option("--lang", lang);
  tok->callback([&] {
    std::vector<std::string> lines;
    for (const auto& l : input_lines(in)) lines.push_back(join(tokenize(l, lang).tokens));
    output_lines(out, lines);
  });

  auto* detok = app.add_subcommand("detokenize", "Space-separated tokens to text");
  io(detok);
  detok->callback([&] {
    std::vector<std::string> lines;
    for (const auto& l : input_lines(in)) lines.push_back(detokenize(from_tokenized(l)));
    output_lines(out, lines);
  });

  std::string model;
  auto* tct = app.add_subcommand("truecase-train", "Learn casing statistics from tokenized text");
  tct->add_option("-i,--input", in);
  tct->add_option("--model", model, "Model file to write")->required();
  tct->callback([&] { train_truecaser(input_sentences(in)).save(model); });

  bool reverse = false;
  auto* tc = app.add_subcommand("truecase", "Apply (or undo with --reverse) truecasing");
  io(tc);
  tc->add_option("--model", model)->required();
  tc->add_flag("--reverse", reverse, "Restore sentence-initial capitals");
  tc->callback([&] {
    const auto m = TruecaseModel::load(model);
    std::vector<Sentence> xs = input_sentences(in);
    for (auto& s : xs) s = reverse ? detruecase(m, s) : apply_truecase(m, s);
    output_lines(out, joined(xs));
  });

  auto* dd = app.add_subcommand("dedup", "Drop repeated src<TAB>tgt lines");
  io(dd);
  dd->callback([&] {
    std::vector<SentencePair> pairs;
    for (const auto& l : input_lines(in)) {
      const auto tab = l.find('\t');
      if (tab == std::string::npos) throw FormatError("dedup expects src<TAB>tgt lines");
      SentencePair p;
      p.src.raw = l.substr(0, tab);
      p.tgt.raw = l.substr(tab + 1);
      pairs.push_back(std::move(p));
    }
    std::vector<std::string> lines;
    for (const auto& p : dedup(pairs)) lines.push_back(p.src.raw + "\t" + p.tgt.raw);
    output_lines(out, lines);
  });

  // --- subword -------------------------------------------------------------
  std::size_t ops = 500;
  auto* bl = app.add_subcommand("bpe-learn", "Learn BPE merges from tokenized text");
  bl->add_option("-i,--input", in);
  bl->add_option("--ops", ops, "Number of merge operations");
  bl->add_option("--model", model, "Merge file to write")->required();
  bl->callback([&] { bpe_learn(input_sentences(in), ops).save(model); });

  auto* ba = app.add_subcommand("bpe-apply", "Segment tokenized text");
  io(ba);
  ba->add_option("--model", model)->required();
  ba->callback([&] {
    const auto m = BpeModel::load(model);
    auto xs = input_sentences(in);
    parallel_for(xs.size(), [&](std::size_t i) { xs[i] = bpe_apply(m, xs[i]); });
    output_lines(out, joined(xs));
  });

  auto* br = app.add_subcommand("bpe-reverse", "Join BPE pieces back into words");
  io(br);
  br->callback([&] {
    auto xs = input_sentences(in);
    for (auto& s : xs) s = bpe_reverse(s).sentence;
    output_lines(out, joined(xs));
  });

  // --- ngram_lm ------------------------------------------------------------
  LmOptions lm_opts;
  auto* lt = app.add_subcommand("lm-train", "Train an interpolated add-k n-gram model");
  lt->add_option("-i,--input", in);
  lt->add_option("--order", lm_opts.order);
  lt->add_option("--k", lm_opts.k);
  lt->add_option("--lambdas", lm_opts.lambdas, "One weight per order")->delimiter(',');
  lt->add_option("--model", model)->required();
  lt->callback([&] { NgramLm::train(input_sentences(in), lm_opts).save(model); });

  auto* ls = app.add_subcommand("lm-score", "Score tokenized lines");
  io(ls);
  ls->add_option("--model", model)->required();
  ls->callback([&] {
    const auto lm = NgramLm::load(model);
    Output o(out);
    std::size_t n = 0;
    for (const auto& s : input_sentences(in)) {
      json j;
      j["line_no"] = ++n;
      j["logprob"] = lm.logprob(s);
      j["per_token_logprob"] = lm.per_token_logprob(s.tokens);
      *o << j.dump() << '\n';
    }
  });

  // --- align ---------------------------------------------------------------
  std::string src, tgt, lexicon, distortion;
  std::size_t ibm1_iters = 5, ibm2_iters = 5;
  auto* at = app.add_subcommand("align-train", "IBM 1 then IBM 2 on tokenized parallel text");
  at->add_option("--src", src)->required();
  at->add_option("--tgt", tgt)->required();
  at->add_option("--ibm1-iters", ibm1_iters);
  at->add_option("--ibm2-iters", ibm2_iters);
  at->add_option("--lexicon", lexicon, "Lexicon file to write")->required();
  at->add_option("--distortion", distortion, "Distortion file to write")->required();
  at->add_option("-o,--output", out, "Log-likelihood trace (JSON)");
  at->callback([&] {
    const auto pairs = tokenized_pairs(src, tgt);
    const auto m1 = ibm1_train(pairs, ibm1_iters);
    const auto m2 = ibm2_train(pairs, ibm2_iters, m1.lexicon);
    m2.lexicon.save(lexicon);
    m2.distortion.save(distortion);
    output_json(out, {{"ibm1", m1.log_likelihood}, {"ibm2", m2.log_likelihood}});
  });

  auto* as = app.add_subcommand("align-score", "Viterbi alignments of tokenized parallel text");
  as->add_option("--src", src)->required();
  as->add_option("--tgt", tgt)->required();
  as->add_option("--lexicon", lexicon)->required();
  as->add_option("--distortion", distortion)->required();
  as->add_option("-o,--output", out);
  as->callback([&] {
    const auto lex = LexiconTable::load(lexicon);
    const auto dist = DistortionTable::load(distortion);
    const auto pairs = tokenized_pairs(src, tgt);
    Output o(out);
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      const auto a = align_viterbi(lex, dist, pairs[i].src.tokens, pairs[i].tgt.tokens);
      json links = json::array();
      for (const auto& l : a.links) links.push_back(l ? json(*l) : json(nullptr));
      *o << json{{"line_no", i + 1}, {"score", a.score}, {"links", links}}.dump() << '\n';
    }
  });

  // --- toymt ---------------------------------------------------------------
  ToyTrainOptions toy;
  std::string direction = "s2t", orientation = "l2r", out_dir;
  auto* tt = app.add_subcommand("toy-train", "Train a toy translator on tokenized parallel text");
  tt->add_option("--src", src)->required();
  tt->add_option("--tgt", tgt)->required();
  tt->add_option("--out", out_dir, "Model directory")->required();
  tt->add_option("--direction", direction, "s2t or t2s");
  tt->add_option("--orientation", orientation, "l2r or r2l");
  tt->add_option("--ibm1-iters", toy.ibm1_iters);
  tt->add_option("--ibm2-iters", toy.ibm2_iters);
  tt->add_option("--order", toy.lm.order);
  tt->add_option("--weight-lex", toy.weights.lex);
  tt->add_option("--weight-lm", toy.weights.lm);
  tt->add_option("--weight-len", toy.weights.len);
  tt->add_option("--beam", toy.beam);
  tt->add_option("--fanout", toy.fanout);
  tt->add_option("--model-id", toy.model_id);
  tt->callback([&] {
    toy.direction = parse_direction(direction);
    toy.orientation = parse_orientation(orientation);
    toy_train(tokenized_pairs(src, tgt), toy).save(out_dir);
  });

  std::size_t nbest = 10;
  auto* tr = app.add_subcommand("translate", "Decode tokenized lines into n-best JSON-lines");
  io(tr);
  tr->add_option("--model", model, "Model directory")->required();
  tr->add_option("--nbest", nbest);
  tr->callback([&] {
    const auto spec = TranslatorSpec::load(model);
    const auto xs = input_sentences(in);
    std::vector<NBestList> lists(xs.size());
    parallel_for(xs.size(), [&](std::size_t i) {
      lists[i] = decode(spec, xs[i], nbest);
      lists[i].sent_id = i;
    });
    write_nbest(out == "-" ? "/dev/stdout" : out, lists);
  });

  // --- dataselect ----------------------------------------------------------
  std::string config, lm_path, t2s_dir, report = "-", scores_path;
  std::string src_lang = "src", tgt_lang = "tgt";
  auto* fp = app.add_subcommand("filter-parallel", "Clean raw parallel text");
  fp->add_option("--config", config, "key=value file with SelectionConfig keys");
  fp->add_option("--src", src)->required();
  fp->add_option("--tgt", tgt)->required();
  fp->add_option("--src-lang", src_lang);
  fp->add_option("--tgt-lang", tgt_lang);
  fp->add_option("--lm", lm_path, "Target LM for the LM cut");
  fp->add_option("--lexicon", lexicon);
  fp->add_option("--distortion", distortion);
  fp->add_option("--t2s", t2s_dir, "T2S model directory for the T2S cut");
  fp->add_option("-o,--output", out, "Scored pairs (JSON-lines)")->required();
  fp->add_option("--report", report);
  fp->callback([&] {
    const auto cfg = selection_from(config);
    std::optional<NgramLm> lm;
    std::optional<LexiconTable> lex;
    std::optional<DistortionTable> dist;
    std::optional<TranslatorSpec> t2s;
    if (!lm_path.empty()) lm = NgramLm::load(lm_path);
    if (!lexicon.empty()) lex = LexiconTable::load(lexicon);
    if (!distortion.empty()) dist = DistortionTable::load(distortion);
    if (!t2s_dir.empty()) t2s = TranslatorSpec::load(t2s_dir);
    const auto pairs = read_parallel(src, tgt, src_lang, tgt_lang);
    const auto sel = select_parallel(pairs, cfg,
                                     {lm ? &*lm : nullptr, lex ? &*lex : nullptr, dist ? &*dist : nullptr,
                                      t2s ? &*t2s : nullptr});
    write_scored_pairs(out, sel.retained);
    output_json(report, json::parse(sel.report.to_json()));
  });

  auto* fm = app.add_subcommand("filter-mono", "Clean raw monolingual text");
  io(fm);
  fm->add_option("--config", config);
  fm->add_option("--lang", lang);
  fm->add_option("--lm", lm_path);
  fm->add_option("--scores", scores_path, "Per-token LM score of each kept line");
  fm->add_option("--report", report);
  fm->callback([&] {
    const auto cfg = selection_from(config);
    std::optional<NgramLm> lm;
    if (!lm_path.empty()) lm = NgramLm::load(lm_path);
    std::vector<Sentence> xs;
    for (const auto& l : input_lines(in)) xs.push_back(tokenize(l, lang));
    const auto sel = select_mono(xs, cfg, lm ? &*lm : nullptr);
    output_lines(out, joined(sel.retained));
    if (!scores_path.empty()) {
      std::vector<std::string> lines;
      for (const double s : sel.lm_scores) lines.push_back(json(s).dump());
      output_lines(scores_path, lines);
    }
    output_json(report, json::parse(sel.report.to_json()));
  });

  // --- augment -------------------------------------------------------------
  auto* bt = app.add_subcommand("backtranslate", "Pair target lines with T2S translations");
  io(bt);
  bt->add_option("--model", model, "T2S model directory")->required();
  bt->callback([&] {
    const ToyTranslator t2s(TranslatorSpec::load(model));
    const auto r = back_translate(t2s, input_sentences(in));
    write_scored_pairs(out == "-" ? "/dev/stdout" : out, r.pairs);
    std::cerr << "back translated " << r.pairs.size() << ", skipped " << r.skipped << "\n";
  });

  double ratio = 0.5;
  std::string s2t_dir, flags_path;
  auto* ct = app.add_subcommand("cycletranslate", "Rewrite the least fluent lines as S2T(T2S(x))");
  io(ct);
  ct->add_option("--t2s", t2s_dir)->required();
  ct->add_option("--s2t", s2t_dir)->required();
  ct->add_option("--ratio", ratio);
  auto* score_opt = ct->add_option("--scores", scores_path, "One fluency score per line");
  ct->add_option("--lm", lm_path, "Score lines with this LM instead")->excludes(score_opt);
  ct->add_option("--flags", flags_path, "Write 1 for rewritten lines, 0 otherwise");
  ct->callback([&] {
    const auto xs = input_sentences(in);
    std::vector<double> scores;
    if (!scores_path.empty()) {
      for (const auto& l : read_lines(scores_path)) scores.push_back(std::stod(l));
    } else if (!lm_path.empty()) {
      const auto lm = NgramLm::load(lm_path);
      for (const auto& s : xs) scores.push_back(lm.per_token_logprob(s.tokens));
    } else {
      throw Error("cycletranslate needs --scores or --lm");
    }
    const ToyTranslator t2s(TranslatorSpec::load(t2s_dir));
    const ToyTranslator s2t(TranslatorSpec::load(s2t_dir));
    const auto r = cycle_translate(t2s, s2t, xs, scores, {ratio});
    output_lines(out, joined(r.sentences));
    if (!flags_path.empty()) {
      std::vector<std::string> f;
      for (const bool b : r.cycled) f.emplace_back(b ? "1" : "0");
      output_lines(flags_path, f);
    }
  });

  std::string mode = "small", parallel_path, synthetic_path;
  MixturePlan plan;
  auto* co = app.add_subcommand("construct", "Mix parallel and synthetic pairs");
  co->add_option("--mode", mode, "small or big");
  co->add_option("--seed", plan.seed);
  co->add_option("--num-small", plan.num_small_samples);
  co->add_option("--repeat", plan.parallel_repeat);
  co->add_option("--parallel", parallel_path, "Scored pairs (JSON-lines)")->required();
  co->add_option("--synthetic", synthetic_path, "Scored pairs (JSON-lines)")->required();
  co->add_option("--out-dir", out_dir)->required();
  co->callback([&] {
    if (mode != "small" && mode != "big") throw Error("mode must be small or big");
    plan.mode = mode == "small" ? MixtureMode::small : MixtureMode::big;
    const auto par = read_scored_pairs(parallel_path);
    const auto syn = read_scored_pairs(synthetic_path);
    fs::create_directories(out_dir);
    json manifest;
    manifest["mode"] = mode;
    manifest["seed"] = plan.seed;
    manifest["inputs"] = {{"parallel", sha256_file(parallel_path)}, {"synthetic", sha256_file(synthetic_path)}};
    manifest["parallel_pairs"] = par.size();
    manifest["synthetic_pairs"] = syn.size();
    json corpora = json::array();
    auto emit = [&](const std::string& name, const std::vector<SentencePair>& pairs, std::uint64_t seed) {
      const auto path = fs::path(out_dir) / (name + ".jsonl");
      write_scored_pairs(path, pairs);
      corpora.push_back({{"file", name + ".jsonl"}, {"size", pairs.size()}, {"seed", seed},
                         {"digest", sha256_file(path)}});
    };
    if (plan.mode == MixtureMode::small) {
      const auto all = construct_small(par, syn, plan);
      for (std::size_t k = 0; k < all.size(); ++k) emit("small_" + std::to_string(k + 1), all[k], mix_seed(plan.seed, k));
    } else {
      manifest["repeat"] = plan.parallel_repeat;
      emit("big", construct_big(par, syn, plan), plan.seed);
    }
    manifest["corpora"] = corpora;
    output_json((fs::path(out_dir) / "manifest.json").string(), manifest);
  });

  // --- rerank --------------------------------------------------------------
  std::string nbest_path, l2r_dir, r2l_dir, ref_path, weights_path;
  double optimal_ratio = 0.76;
  auto* rx = app.add_subcommand("rerank-extract", "Annotate n-best lists with reranking features");
  rx->add_option("--nbest", nbest_path)->required();
  rx->add_option("--l2r", l2r_dir)->required();
  rx->add_option("--r2l", r2l_dir)->required();
  rx->add_option("--t2s", t2s_dir)->required();
  rx->add_option("--lm", lm_path)->required();
  rx->add_option("--lexicon", lexicon)->required();
  rx->add_option("--distortion", distortion)->required();
  rx->add_option("--optimal-ratio", optimal_ratio);
  rx->add_option("-o,--output", out);
  rx->callback([&] {
    const auto l2r = TranslatorSpec::load(l2r_dir);
    const auto r2l = TranslatorSpec::load(r2l_dir);
    const auto t2s = TranslatorSpec::load(t2s_dir);
    const auto lm = NgramLm::load(lm_path);
    const auto lex = LexiconTable::load(lexicon);
    const auto dist = DistortionTable::load(distortion);
    auto lists = read_nbest(nbest_path);
    for (auto& l : lists) extract_features(l, {&l2r, &r2l, &t2s, &lm, &lex, &dist, optimal_ratio});
    write_nbest(out == "-" ? "/dev/stdout" : out, lists);
  });

  MiraConfig mira;
  auto* rt = app.add_subcommand("rerank-train", "k-best MIRA against sentence BLEU");
  rt->add_option("--nbest", nbest_path, "Feature-annotated n-best lists")->required();
  rt->add_option("--ref", ref_path, "References, tokenized like the hypotheses")->required();
  rt->add_option("--C", mira.C);
  rt->add_option("--epochs", mira.epochs);
  rt->add_option("--seed", mira.seed);
  rt->add_option("--weights", weights_path, "Weights file to write")->required();
  rt->callback([&] {
    const auto lists = read_nbest(nbest_path);
    std::vector<std::vector<std::string>> refs;
    for (const auto& s : input_sentences(ref_path)) refs.push_back(s.tokens);
    std::vector<std::vector<std::string>> per_list;
    for (const auto& l : lists) {
      if (l.sent_id >= refs.size()) throw FormatError("n-best sentence id beyond the reference file");
      per_list.push_back(refs[l.sent_id]);
    }
    mira_train(lists, per_list, mira).save(weights_path);
  });

  auto* ra = app.add_subcommand("rerank-apply", "Reorder n-best lists by learned weights");
  ra->add_option("--nbest", nbest_path)->required();
  ra->add_option("--weights", weights_path)->required();
  ra->add_option("-o,--output", out);
  ra->callback([&] {
    const auto m = MiraModel::load(weights_path);
    auto lists = read_nbest(nbest_path);
    for (auto& l : lists) l = rerank_apply(m, std::move(l));
    write_nbest(out == "-" ? "/dev/stdout" : out, lists);
  });

  // --- combine -------------------------------------------------------------
  std::vector<std::string> systems, selection;
  std::string truecase_path, trace_path;
  auto* gm = app.add_subcommand("gmse", "Greedy system selection on a dev set");
  gm->add_option("--system", systems, "id=file, JSON-lines {sent_id, tokens}")->required();
  gm->add_option("--ref", ref_path)->required();
  gm->add_option("--truecase", truecase_path, "Finalize hypotheses with this model before scoring");
  gm->add_option("-o,--output", out);
  gm->callback([&] {
    const auto pool = read_pool(systems);
    const auto refs = read_lines(ref_path);
    std::optional<TruecaseModel> tcm;
    if (!truecase_path.empty()) tcm = TruecaseModel::load(truecase_path);
    const auto metric = [&](const std::vector<Tokens>& hyps) {
      std::vector<std::string> text;
      for (const auto& h : hyps) text.push_back(tcm ? finalize(make_sentence(h), *tcm) : detokenize(h));
      return bleu_corpus(text, refs).bleu;
    };
    const auto g = gmse(pool, metric);
    json steps = json::array();
    for (const auto& s : g.trace) steps.push_back({{"selection", s.selection}, {"score", s.score}});
    output_json(out, {{"selection", g.selection}, {"score", g.score}, {"steps", steps}});
  });

  auto* cb = app.add_subcommand("combine", "Confusion-network combination with ConMBR selection");
  cb->add_option("--system", systems, "id=file, JSON-lines {sent_id, tokens}")->required();
  cb->add_option("--select", selection, "System ids to combine (default: all)")->delimiter(',');
  cb->add_option("-o,--output", out);
  cb->add_option("--trace", trace_path, "Backbones and slot tables (JSON)");
  cb->callback([&] {
    const auto pool = read_pool(systems);
    if (selection.empty()) {
      for (const auto& [id, _] : pool.systems) selection.push_back(id);
    }
    std::sort(selection.begin(), selection.end());
    const auto combined = combine_pool(pool, selection);
    Output o(out);
    json sentences = json::array();
    for (std::size_t i = 0; i < combined.size(); ++i) {
      const auto& c = combined[i];
      *o << json{{"sent_id", i}, {"tokens", c.tokens}, {"selected", selection[c.selected]}}.dump() << '\n';
      json slots = json::array();
      for (const auto& slot : c.network.slots) slots.push_back(slot.votes);
      sentences.push_back({{"sent_id", i},
                           {"backbone", c.network.backbone_id},
                           {"slots", slots},
                           {"consensus", c.consensus},
                           {"selected", selection[c.selected]}});
    }
    if (!trace_path.empty()) output_json(trace_path, {{"selection", selection}, {"sentences", sentences}});
  });

  // --- postprocess ---------------------------------------------------------
  bool no_repair = false;
  auto* pp = app.add_subcommand("postprocess", "De-BPE, repair numbers, de-truecase, detokenize");
  io(pp);
  pp->add_option("--src", src, "Tokenized source, line-aligned with the input");
  pp->add_option("--truecase", truecase_path)->required();
  pp->add_flag("--no-repair", no_repair);
  pp->callback([&] {
    const auto tcm = TruecaseModel::load(truecase_path);
    const auto hyps = input_sentences(in);
    std::vector<Sentence> sources;
    if (!no_repair) {
      if (src.empty()) throw Error("number repair needs --src (or pass --no-repair)");
      sources = input_sentences(src);
      if (sources.size() != hyps.size()) throw FormatError("--src and input differ in length");
    }
    std::vector<std::string> lines(hyps.size());
    parallel_for(hyps.size(), [&](std::size_t i) {
      RepairFn repair;
      if (!no_repair) repair = [&](const Sentence& s) { return repair_numbers(sources[i], s); };
      lines[i] = finalize(hyps[i], tcm, repair);
    });
    output_lines(out, lines);
  });

  // --- metrics -------------------------------------------------------------
  std::string hyp_path;
  auto* bl_cmd = app.add_subcommand("bleu", "Corpus BLEU of detokenized text");
  bl_cmd->add_option("--hyp", hyp_path)->required();
  bl_cmd->add_option("--ref", ref_path)->required();
  bl_cmd->callback([&] {
    const auto hyps = input_lines(hyp_path);
    const auto refs = read_lines(ref_path);
    output_json("-", bleu_json(bleu_corpus(hyps, refs)));
  });

  // --- cipher data ---------------------------------------------------------
  CipherOptions cipher;
  auto* gen = app.add_subcommand("generate", "Write a synthetic cipher language pair");
  gen->add_option("--out-dir", out_dir)->required();
  gen->add_option("--seed", cipher.seed);
  gen->add_option("--parallel", cipher.parallel);
  gen->add_option("--mono", cipher.mono);
  gen->add_option("--dev", cipher.dev);
  gen->add_option("--test", cipher.test);
  gen->add_option("--nouns", cipher.nouns);
  gen->add_option("--noise", cipher.mono_noise, "Share of noisy monolingual sentences");
  gen->callback([&] { write_cipher(generate_cipher(cipher), out_dir); });

  // --- pipeline ------------------------------------------------------------
  auto* pipe = app.add_subcommand("pipeline", "Config-driven end-to-end runs");
  pipe->require_subcommand(1);
  RunOptions run_opts;
  std::vector<double> ratios;
  auto print_report = [](const PipelineConfig& cfg) {
    const auto path = cfg.work_dir / "report.json";
    if (!fs::exists(path)) return;
    for (const auto& line : read_lines(path)) std::cout << line << "\n";
  };
  auto* prun = pipe->add_subcommand("run", "Run every stage");
  prun->add_option("--config", config)->required();
  prun->add_flag("--dry-run", run_opts.dry_run, "Print the planned stages, write nothing");
  prun->add_option("--until", run_opts.until, "Stop after this stage");
  prun->callback([&] {
    const auto cfg = PipelineConfig::load(config);
    const auto m = run_pipeline(cfg, run_opts);
    if (run_opts.dry_run) {
      std::cout << m.to_json();
    } else {
      print_report(cfg);
    }
  });
  auto* pres = pipe->add_subcommand("resume", "Rerun only stages whose inputs, config or outputs changed");
  pres->add_option("--config", config)->required();
  pres->add_option("--until", run_opts.until);
  pres->callback([&] {
    const auto cfg = PipelineConfig::load(config);
    run_opts.resume = true;
    run_pipeline(cfg, run_opts);
    print_report(cfg);
  });
  auto* pabl = pipe->add_subcommand("ablate", "Dev BLEU of synthetic-only models per cycle ratio");
  pabl->add_option("--config", config)->required();
  pabl->add_option("--ratios", ratios, "Comma-separated ratios (default: ablation.ratios)")->delimiter(',');
  pabl->callback([&] {
    const auto cfg = PipelineConfig::load(config);
    const auto rows = run_ablation(cfg, ratios.empty() ? cfg.ablation_ratios : ratios);
    json j = json::array();
    for (const auto& r : rows) {
      j.push_back({{"ratio", r.ratio}, {"dev_bleu", r.dev_bleu}, {"cycled", r.cycled},
                   {"synthetic_pairs", r.synthetic_pairs}});
    }
    output_json("-", j);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "cyclemt: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
