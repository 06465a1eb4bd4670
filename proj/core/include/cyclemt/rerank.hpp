#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cyclemt/align.hpp"
#include "cyclemt/ngram_lm.hpp"
#include "cyclemt/toymt.hpp"

namespace cyclemt {

inline constexpr std::size_t kNumFeatures = 6;
inline constexpr std::array<std::string_view, kNumFeatures> kFeatureNames = {
    "l2r_score", "r2l_score", "t2s_score", "lm_score", "align_score", "ratio_deviation"};

using FeatureVector = std::array<double, kNumFeatures>;

struct FeatureScorers {
  const TranslatorSpec* l2r = nullptr;
  const TranslatorSpec* r2l = nullptr;
  const TranslatorSpec* t2s = nullptr;
  const NgramLm* lm = nullptr;
  const LexiconTable* lex = nullptr;
  const DistortionTable* dist = nullptr;
  double optimal_ratio = 0.76;
};

/// Annotates every hypothesis with the six reranking features. An empty
/// hypothesis gets the alignment floor log(1e-9).
void extract_features(NBestList& nbest, const FeatureScorers& scorers);

/// Reads the six features in fixed order; throws when one is missing.
FeatureVector feature_vector(const Hypothesis& h);

double dot(const FeatureVector& w, const FeatureVector& f);

struct MiraConfig {
  double C = 0.01;
  std::size_t epochs = 10;
  std::uint64_t seed = 1;
  FeatureVector init{1, 0, 0, 0, 0, 0};
};

struct MiraModel {
  FeatureVector weights{1, 0, 0, 0, 0, 0};
  double C = 0.01;
  std::size_t epochs = 10;
  std::uint64_t seed = 1;

  /// "name<TAB>value" lines in feature order.
  void save(const std::filesystem::path& path) const;
  static MiraModel load(const std::filesystem::path& path);
};

/// Gain of hypothesis `hyp` of list `list`; higher is better.
using GainFn = std::function<double(std::size_t list, const Hypothesis& hyp)>;

/// k-best batch MIRA with hope/fear selection and updates capped by C.
/// Lists are visited in input order every epoch. Returns the average of the
/// weight vectors seen after each list.
MiraModel mira_train(std::span<const NBestList> dev, const GainFn& gain, const MiraConfig& cfg = {});

/// Same, with sentence BLEU of hypothesis tokens against tokenized references.
MiraModel mira_train(std::span<const NBestList> dev, std::span<const std::vector<std::string>> refs,
                     const MiraConfig& cfg = {});

/// Stable sort by model score, descending.
NBestList rerank_apply(const MiraModel& model, NBestList nbest);

}  // namespace cyclemt
