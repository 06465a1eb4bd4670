#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "cyclemt/corpus.hpp"

namespace cyclemt {

/// Ordered BPE merge table. Non-final pieces of a segmented word carry the
/// continuation marker ("@@"), so "cat" with no merges becomes "c@@ a@@ t".
class BpeModel {
 public:
  using Merge = std::pair<std::string, std::string>;

  BpeModel() = default;
  explicit BpeModel(std::vector<Merge> merges, std::string marker = "@@");

  const std::vector<Merge>& merges() const { return merges_; }
  std::size_t num_operations() const { return merges_.size(); }
  const std::string& marker() const { return marker_; }

  /// Merge priority (lower merges first); -1 when the pair is not a merge.
  long rank(const std::string& left, const std::string& right) const;

  /// Segments one word into pieces, markers included.
  std::vector<std::string> segment(const std::string& word) const;

  void save(const std::filesystem::path& path) const;
  static BpeModel load(const std::filesystem::path& path);

 private:
  std::vector<Merge> merges_;
  std::string marker_ = "@@";
  std::unordered_map<std::string, long> ranks_;
};

/// Greedy most-frequent-pair learning over the word frequency table. Ties go
/// to the lexicographically smallest pair; stops when no pair occurs twice.
BpeModel bpe_learn(std::span<const Sentence> corpus, std::size_t num_operations);

Sentence bpe_apply(const BpeModel& model, const Sentence& sentence);

struct BpeReverseResult {
  Sentence sentence;
  bool dangling_marker = false;
};

/// Joins marker-suffixed pieces with their successors.
BpeReverseResult bpe_reverse(const Sentence& sentence, std::string_view marker = "@@");

}  // namespace cyclemt
