#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "cyclemt/augment.hpp"
#include "cyclemt/config.hpp"
#include "cyclemt/dataselect.hpp"
#include "cyclemt/ngram_lm.hpp"
#include "cyclemt/rerank.hpp"
#include "cyclemt/toymt.hpp"

namespace cyclemt {

/// Everything run_pipeline reads from the flat config file. Data paths are
/// resolved against the config file's directory.
struct PipelineConfig {
  std::filesystem::path train_src, train_tgt, mono, dev_src, dev_ref, test_src, test_ref;
  std::filesystem::path work_dir;
  std::string src_lang = "src";
  std::string tgt_lang = "tgt";

  SelectionConfig select_parallel;
  SelectionConfig select_mono;
  /// Filter for synthetic pairs; only the rule, ratio and alignment stages
  /// apply.
  SelectionConfig select_synthetic;

  std::size_t bpe_ops = 500;
  LmOptions lm;
  std::size_t ibm1_iters = 5;
  std::size_t ibm2_iters = 5;
  ModelWeights weights;
  std::size_t beam = 10;
  std::size_t fanout = 5;
  std::size_t nbest = 10;

  double cycle_ratio = 0.5;
  MixturePlan plan;
  MiraConfig mira;
  std::vector<double> ablation_ratios{0.0, 0.25, 0.5, 0.75};
  std::size_t workers = 0;  // 0 = CYCLEMT_WORKERS or hardware

  /// The parsed file, used for per-stage config digests.
  Config source;

  /// Keys: data.{train_src,train_tgt,mono,dev_src,dev_ref,test_src,test_ref},
  /// run.dir, run.workers, lang.{src,tgt}, select.{parallel,mono,synthetic}.*,
  /// bpe.ops, lm.{order,k,lambdas}, align.{ibm1_iters,ibm2_iters},
  /// mt.{weight_lex,weight_lm,weight_len,beam,fanout,nbest}, cycle.ratio,
  /// construct.{num_small,repeat,seed}, rerank.{C,epochs,seed},
  /// ablation.ratios.
  static PipelineConfig from_config(const Config& cfg, const std::filesystem::path& base_dir);
  static PipelineConfig load(const std::filesystem::path& path);
  void validate() const;
};

struct StageRecord {
  std::string name;
  std::string config_digest;
  /// Input name -> SHA-256. Work-dir files by relative path, external data
  /// by config key ("data.mono").
  std::map<std::string, std::string> inputs;
  std::map<std::string, std::string> outputs;  // relative path -> SHA-256
  std::map<std::string, std::uint64_t> seeds;
  std::map<std::string, std::size_t> counts;
  bool planned = false;  // dry run: nothing was executed
};

struct PipelineManifest {
  std::vector<StageRecord> stages;

  const StageRecord* find(std::string_view stage) const;
  std::string to_json() const;
  static PipelineManifest from_json(std::string_view text);
  static PipelineManifest load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;
};

/// Stage names in execution order.
const std::vector<std::string>& pipeline_stages();

/// The ladder rows reported on dev and test, in order.
const std::vector<std::string>& ladder_stages();

struct RunOptions {
  bool dry_run = false;
  /// Skip stages whose manifest entry still matches their config, inputs and
  /// outputs.
  bool resume = false;
  /// Run only up to and including this stage (empty = all).
  std::string until;
};

/// Runs (or plans) the full flow in cfg.work_dir, writing manifest.json and,
/// separately, timings.json with wall-clock seconds per executed stage.
PipelineManifest run_pipeline(const PipelineConfig& cfg, const RunOptions& options = {});

struct LadderReport {
  std::map<std::string, double> dev;   // ladder stage -> BLEU
  std::map<std::string, double> test;
  std::vector<std::string> gmse_selection;
  static LadderReport load(const std::filesystem::path& path);
};

struct AblationRow {
  double ratio = 0.0;
  double dev_bleu = 0.0;
  std::size_t cycled = 0;
  std::size_t synthetic_pairs = 0;
};

/// For each ratio, cycle-translates the filtered monolingual data, back
/// translates it, trains on the synthetic pairs alone and scores dev.
/// Runs the stages it depends on first (resuming when possible) and writes
/// ablation/report.json. Cycle and back translations are cached across ratios.
std::vector<AblationRow> run_ablation(const PipelineConfig& cfg, std::span<const double> ratios);

}  // namespace cyclemt
