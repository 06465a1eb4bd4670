#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace cyclemt {

/// Generator for a synthetic language pair with a known translation
/// function. Sentences are "NP verb NP [vuonna YYYY-YY] ." with
/// NP = noun det adj particle. Source words are uninflected; on the target
/// side every noun has one of three classes, and determiner, adjective and
/// particle agree with it. Translation is therefore monotone and one-to-one
/// per word, but choosing the right forms needs target-side context.
struct CipherOptions {
  std::uint64_t seed = 7;
  std::size_t parallel = 5000;
  std::size_t mono = 20000;
  std::size_t dev = 300;
  std::size_t test = 300;
  std::size_t nouns = 1000;
  std::size_t adjectives = 120;
  std::size_t verbs = 20;
  /// Monolingual sentences whose noun phrases use a wrong, internally
  /// consistent class. Each noun has one fixed wrong class, and noisy
  /// sentences only use the nouns ranked in the top 1% to 5% by frequency.
  double mono_noise = 0.3;
  /// Zipf exponent of noun frequencies.
  double noun_zipf = 1.0;
  double parallel_misaligned = 0.02;
  double parallel_illegal = 0.01;
  double parallel_short = 0.01;
  /// Share of sentences with a year range.
  double number_rate = 0.3;
  /// Share of parallel targets that write a range "2006 at 07" instead of
  /// "2006-07". Dev, test and monolingual text always use the hyphen.
  double parallel_split_ranges = 0.5;
};

struct CipherCorpus {
  std::vector<std::string> train_src, train_tgt;
  std::vector<std::string> mono_tgt;
  std::vector<bool> mono_noisy;
  /// mono_tgt with the planted noise undone.
  std::vector<std::string> mono_clean;
  std::vector<std::string> dev_src, dev_ref;
  std::vector<std::string> test_src, test_ref;
};

CipherCorpus generate_cipher(const CipherOptions& options = {});

/// Writes train.src, train.tgt, mono.tgt, mono.noisy (0/1 per line), mono.clean,
/// dev.src, dev.ref, test.src, test.ref.
void write_cipher(const CipherCorpus& corpus, const std::filesystem::path& dir);

}  // namespace cyclemt
