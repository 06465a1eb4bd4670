#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "cyclemt/corpus.hpp"

namespace cyclemt {

struct NumberToken {
  std::string surface;
  std::string digits;  // digit characters of surface, in order
  /// Runs of digits and non-digits, e.g. "2006-07" -> "d-d".
  std::string signature;
  std::size_t position = 0;
};

bool has_digit(std::string_view token);
std::vector<NumberToken> extract_numbers(const Sentence& s);

/// Rewrites hypothesis numbers whose digits do not appear in the source.
/// A candidate is a window of digit-bearing hypothesis tokens, adjacent ones
/// at most one other token apart ("2006 at 07"); it is replaced by the unused
/// source number whose digit string is closest, if that distance is <= 2
/// and no other source number ties. Best matches (smallest distance, then
/// longest window) are applied first until nothing changes.
Sentence repair_numbers(const Sentence& src, const Sentence& hyp);

using RepairFn = std::function<Sentence(const Sentence&)>;

/// de-BPE -> repair (optional) -> de-truecase -> detokenize.
std::string finalize(const Sentence& hyp, const TruecaseModel& truecase, const RepairFn& repair = {});

}  // namespace cyclemt
