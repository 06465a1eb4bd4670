#include "cyclemt/rerank.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "cyclemt/dataselect.hpp"
#include "cyclemt/error.hpp"
#include "cyclemt/metrics.hpp"
#include "cyclemt/parallel.hpp"
#include "numfmt.hpp"

namespace cyclemt {

namespace {

void require(const void* scorer, std::string_view feature) {
  if (!scorer) throw Error("missing scorer for feature '" + std::string(feature) + "'");
}

}  // namespace

void extract_features(NBestList& nbest, const FeatureScorers& s) {
  require(s.l2r, kFeatureNames[0]);
  require(s.r2l, kFeatureNames[1]);
  require(s.t2s, kFeatureNames[2]);
  require(s.lm, kFeatureNames[3]);
  require(s.lex && s.dist ? s.lex : nullptr, kFeatureNames[4]);
  const auto& src = nbest.source.tokens;
  parallel_for(nbest.hyps.size(), [&](std::size_t k) {
    auto& h = nbest.hyps[k];
    const auto& e = h.tokens;
    h.features[std::string(kFeatureNames[0])] = score_hypothesis(*s.l2r, src, e).logscore;
    h.features[std::string(kFeatureNames[1])] = score_hypothesis(*s.r2l, src, e).logscore;
    h.features[std::string(kFeatureNames[2])] = score_hypothesis(*s.t2s, e, src).logscore;
    h.features[std::string(kFeatureNames[3])] = s.lm->logprob(e);
    h.features[std::string(kFeatureNames[4])] =
        e.empty() ? std::log(kOovFloor) : align_viterbi(*s.lex, *s.dist, src, e).score;
    h.features[std::string(kFeatureNames[5])] =
        ratio_score(src.size(), std::max<std::size_t>(1, e.size()), s.optimal_ratio);
  });
}

FeatureVector feature_vector(const Hypothesis& h) {
  FeatureVector f{};
  for (std::size_t i = 0; i < kNumFeatures; ++i) {
    const auto it = h.features.find(std::string(kFeatureNames[i]));
    if (it == h.features.end()) {
      throw Error("hypothesis lacks feature '" + std::string(kFeatureNames[i]) + "'");
    }
    f[i] = it->second;
  }
  return f;
}

double dot(const FeatureVector& w, const FeatureVector& f) {
  double s = 0.0;
  for (std::size_t i = 0; i < kNumFeatures; ++i) s += w[i] * f[i];
  return s;
}

MiraModel mira_train(std::span<const NBestList> dev, const GainFn& gain, const MiraConfig& cfg) {
  if (dev.empty()) throw Error("empty dev set");
  if (!(cfg.C >= 0.0)) throw Error("MIRA C must be >= 0");

  // Cache feature vectors and gains once.
  std::vector<std::vector<FeatureVector>> feats(dev.size());
  std::vector<std::vector<double>> gains(dev.size());
  for (std::size_t i = 0; i < dev.size(); ++i) {
    for (const auto& h : dev[i].hyps) {
      feats[i].push_back(feature_vector(h));
      gains[i].push_back(gain(i, h));
    }
  }

  FeatureVector w = cfg.init;
  FeatureVector sum{};
  std::size_t steps = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = 0; i < dev.size(); ++i) {
      const auto& F = feats[i];
      const auto& G = gains[i];
      if (!F.empty()) {
        std::size_t hope = 0, fear = 0;
        double best_hope = -INFINITY, best_fear = -INFINITY;
        for (std::size_t k = 0; k < F.size(); ++k) {
          const double m = dot(w, F[k]);
          if (m + G[k] > best_hope) {
            best_hope = m + G[k];
            hope = k;
          }
          if (m - G[k] > best_fear) {
            best_fear = m - G[k];
            fear = k;
          }
        }
        FeatureVector diff{};
        double norm2 = 0.0;
        for (std::size_t d = 0; d < kNumFeatures; ++d) {
          diff[d] = F[hope][d] - F[fear][d];
          norm2 += diff[d] * diff[d];
        }
        const double loss = (G[hope] - G[fear]) - dot(w, diff);
        if (loss > 0.0 && norm2 > 0.0) {
          const double eta = std::min(cfg.C, loss / norm2);
          for (std::size_t d = 0; d < kNumFeatures; ++d) w[d] += eta * diff[d];
        }
      }
      for (std::size_t d = 0; d < kNumFeatures; ++d) sum[d] += w[d];
      ++steps;
    }
  }

  MiraModel model;
  model.C = cfg.C;
  model.epochs = cfg.epochs;
  model.seed = cfg.seed;
  if (steps == 0) {
    model.weights = cfg.init;
  } else {
    for (std::size_t d = 0; d < kNumFeatures; ++d) model.weights[d] = sum[d] / static_cast<double>(steps);
  }
  return model;
}

MiraModel mira_train(std::span<const NBestList> dev, std::span<const std::vector<std::string>> refs,
                     const MiraConfig& cfg) {
  if (refs.size() != dev.size()) throw Error("one reference per n-best list required");
  return mira_train(
      dev, [&](std::size_t i, const Hypothesis& h) { return bleu_sentence(h.tokens, refs[i]); }, cfg);
}

NBestList rerank_apply(const MiraModel& model, NBestList nbest) {
  std::vector<double> score(nbest.hyps.size());
  for (std::size_t k = 0; k < nbest.hyps.size(); ++k) score[k] = dot(model.weights, feature_vector(nbest.hyps[k]));
  std::vector<std::size_t> order(nbest.hyps.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return score[a] > score[b]; });
  std::vector<Hypothesis> sorted;
  sorted.reserve(order.size());
  for (const auto k : order) sorted.push_back(std::move(nbest.hyps[k]));
  nbest.hyps = std::move(sorted);
  return nbest;
}

void MiraModel::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  for (std::size_t i = 0; i < kNumFeatures; ++i) out << kFeatureNames[i] << '\t' << numfmt::format(weights[i]) << '\n';
}

MiraModel MiraModel::load(const std::filesystem::path& path) {
  MiraModel m;
  std::array<bool, kNumFeatures> seen{};
  for (const auto& line : read_lines(path)) {
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw FormatError(path.string() + ": expected 'name<TAB>value'");
    const auto name = line.substr(0, tab);
    const auto it = std::find(kFeatureNames.begin(), kFeatureNames.end(), name);
    if (it == kFeatureNames.end()) throw FormatError(path.string() + ": unknown feature '" + name + "'");
    const auto idx = static_cast<std::size_t>(it - kFeatureNames.begin());
    m.weights[idx] = numfmt::parse(line.substr(tab + 1));
    seen[idx] = true;
  }
  for (std::size_t i = 0; i < kNumFeatures; ++i) {
    if (!seen[i]) throw FormatError(path.string() + ": missing weight for '" + std::string(kFeatureNames[i]) + "'");
  }
  return m;
}

}  // namespace cyclemt
