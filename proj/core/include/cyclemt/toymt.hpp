#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "cyclemt/align.hpp"
#include "cyclemt/corpus.hpp"
#include "cyclemt/ngram_lm.hpp"

namespace cyclemt {

enum class Direction { s2t, t2s };
enum class Orientation { l2r, r2l };

struct ModelWeights {
  double lex = 1.0;
  double lm = 0.5;
  double len = 0.1;
};

/// Toy statistical translator: monotone one-to-one lexical translation
/// rescored by an n-gram LM over the output side. An R2L spec's LM is
/// trained on reversed output text; its inputs and outputs are still in
/// surface order, the reversal happens inside decode and scoring.
struct TranslatorSpec {
  Direction direction = Direction::s2t;
  Orientation orientation = Orientation::l2r;
  LexiconTable lexicon;  // t(output | input)
  NgramLm lm;
  ModelWeights weights;
  std::size_t beam = 10;
  /// Lexical candidates considered per known input token.
  std::size_t fanout = 5;
  std::string model_id = "toy";

  /// Writes spec.txt, lexicon.txt and lm.txt into `dir`.
  void save(const std::filesystem::path& dir) const;
  static TranslatorSpec load(const std::filesystem::path& dir);
};

struct ToyTrainOptions {
  Direction direction = Direction::s2t;
  Orientation orientation = Orientation::l2r;
  std::size_t ibm1_iters = 5;
  std::size_t ibm2_iters = 5;
  LmOptions lm;
  ModelWeights weights;
  std::size_t beam = 10;
  std::size_t fanout = 5;
  std::string model_id = "toy";
};

struct Hypothesis {
  std::vector<std::string> tokens;
  double logscore = 0.0;
  double lex = 0.0;
  double lm = 0.0;
  double len = 0.0;
  /// Reranking features attached after decoding.
  std::map<std::string, double> features;
};

struct NBestList {
  std::size_t sent_id = 0;
  std::string model_id;
  Sentence source;
  std::vector<Hypothesis> hyps;
};

/// Trains IBM 1 then IBM 2 in the requested direction (sides swapped for
/// T2S) and an LM on the output side (reversed for R2L).
TranslatorSpec toy_train(std::span<const SentencePair> pairs, const ToyTrainOptions& options = {});

/// Beam search, one output token per input token. Known input tokens propose
/// their `fanout` most probable translations, unknown ones are copied.
/// Returns up to `n` distinct complete hypotheses by descending score; an
/// empty source yields a single empty hypothesis.
NBestList decode(const TranslatorSpec& spec, const Sentence& source, std::size_t n);

/// Forced scoring of an arbitrary output under the spec's factorization.
/// Output token i is attached to input token i (tokens past the input's end
/// take their best input token): its lexical term is log p(e | f), with
/// p(e|f) = [e == f] for unknown f and a 1e-9 floor.
Hypothesis score_hypothesis(const TranslatorSpec& spec, std::span<const std::string> source,
                            std::span<const std::string> output);

/// Read-only translator interface; implementations must allow concurrent
/// calls.
class Translator {
 public:
  virtual ~Translator() = default;
  virtual const std::string& id() const = 0;
  virtual NBestList translate(const Sentence& source, std::size_t n) const = 0;
  virtual double score(std::span<const std::string> source,
                       std::span<const std::string> output) const = 0;
};

class ToyTranslator final : public Translator {
 public:
  explicit ToyTranslator(TranslatorSpec spec) : spec_(std::move(spec)) {}
  const std::string& id() const override { return spec_.model_id; }
  NBestList translate(const Sentence& source, std::size_t n) const override {
    return decode(spec_, source, n);
  }
  double score(std::span<const std::string> source,
               std::span<const std::string> output) const override {
    return score_hypothesis(spec_, source, output).logscore;
  }
  const TranslatorSpec& spec() const { return spec_; }

 private:
  TranslatorSpec spec_;
};

/// JSON-lines, one hypothesis per line:
/// {sent_id, model_id, rank, src, tokens, logscore, features:{l2r, lm, lex, len, ...}}.
void write_nbest(const std::filesystem::path& path, std::span<const NBestList> lists);
std::vector<NBestList> read_nbest(const std::filesystem::path& path);

/// Sentences of the 1-best hypotheses, empty for empty lists.
std::vector<Sentence> one_best(std::span<const NBestList> lists);

}  // namespace cyclemt
