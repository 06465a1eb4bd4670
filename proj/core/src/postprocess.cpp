#include "cyclemt/postprocess.hpp"

#include <algorithm>
#include <optional>

#include "cyclemt/subword.hpp"
#include "utf8.hpp"

namespace cyclemt {

namespace {

constexpr std::size_t kMaxDistance = 2;

std::size_t char_distance(std::string_view a, std::string_view b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = std::min({prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1), prev[j] + 1, cur[j - 1] + 1});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

std::string digits_of(std::string_view token) {
  std::string d;
  for (const char c : token) {
    if (c >= '0' && c <= '9') d.push_back(c);
  }
  return d;
}

struct Candidate {
  std::size_t first = 0;  // hyp token range [first, last]
  std::size_t last = 0;
  std::size_t src = 0;    // index into source numbers
  std::size_t distance = 0;
};

}  // namespace

bool has_digit(std::string_view token) {
  return std::any_of(token.begin(), token.end(), [](char c) { return c >= '0' && c <= '9'; });
}

std::vector<NumberToken> extract_numbers(const Sentence& s) {
  std::vector<NumberToken> out;
  for (std::size_t i = 0; i < s.tokens.size(); ++i) {
    const auto& tok = s.tokens[i];
    if (!has_digit(tok)) continue;
    NumberToken n;
    n.surface = tok;
    n.digits = digits_of(tok);
    n.position = i;
    bool in_digits = false;
    for (const auto& cp : utf8::decode(tok)) {
      const bool d = cp.valid && utf8::is_digit(cp.value);
      if (!d) {
        n.signature.append(tok, cp.offset, cp.length);
      } else if (!in_digits) {
        n.signature.push_back('d');
      }
      in_digits = d;
    }
    out.push_back(std::move(n));
  }
  return out;
}

Sentence repair_numbers(const Sentence& src, const Sentence& hyp) {
  const auto src_numbers = extract_numbers(src);
  Sentence out = hyp;
  if (src_numbers.empty()) return out;

  for (;;) {
    const auto& toks = out.tokens;
    // Tokens whose digits already occur in the source are settled, and claim
    // one source number each.
    std::vector<bool> used(src_numbers.size(), false);
    std::vector<bool> settled(toks.size(), false);
    for (std::size_t i = 0; i < toks.size(); ++i) {
      if (!has_digit(toks[i])) continue;
      const auto d = digits_of(toks[i]);
      bool match = false;
      for (std::size_t k = 0; k < src_numbers.size(); ++k) {
        if (src_numbers[k].digits != d) continue;
        match = true;
        if (!used[k]) {
          used[k] = true;
          break;
        }
      }
      settled[i] = match;
    }

    std::optional<Candidate> best;
    for (std::size_t first = 0; first < toks.size(); ++first) {
      if (!has_digit(toks[first]) || settled[first]) continue;
      std::string digits;
      std::size_t last = first;
      while (true) {
        digits += digits_of(toks[last]);
        std::optional<std::size_t> pick;
        std::size_t pick_dist = kMaxDistance + 1;
        bool tie = false;
        for (std::size_t k = 0; k < src_numbers.size(); ++k) {
          if (used[k]) continue;
          const std::size_t dist = char_distance(digits, src_numbers[k].digits);
          if (dist < pick_dist) {
            pick = k;
            pick_dist = dist;
            tie = false;
          } else if (dist == pick_dist && pick) {
            tie = true;
          }
        }
        if (pick && !tie) {
          const Candidate c{first, last, *pick, pick_dist};
          const auto span_len = [](const Candidate& x) { return x.last - x.first; };
          if (!best || c.distance < best->distance ||
              (c.distance == best->distance && span_len(c) > span_len(*best))) {
            best = c;
          }
        }
        // Extend across at most one non-digit token to the next number.
        std::size_t next = last + 1;
        if (next < toks.size() && !has_digit(toks[next])) ++next;
        if (next >= toks.size() || !has_digit(toks[next]) || settled[next]) break;
        last = next;
      }
    }
    if (!best) break;

    Sentence repaired;
    repaired.raw = out.raw;
    repaired.lang = out.lang;
    const bool has_glue = out.glue.size() == out.tokens.size();
    for (std::size_t i = 0; i < out.tokens.size(); ++i) {
      if (i < best->first || i > best->last) {
        repaired.tokens.push_back(out.tokens[i]);
        if (has_glue) repaired.glue.push_back(out.glue[i]);
      } else if (i == best->first) {
        repaired.tokens.push_back(src_numbers[best->src].surface);
        if (has_glue) repaired.glue.push_back(out.glue[i]);
      }
    }
    out = std::move(repaired);
  }
  return out;
}

std::string finalize(const Sentence& hyp, const TruecaseModel& truecase, const RepairFn& repair) {
  Sentence s = bpe_reverse(hyp).sentence;
  if (repair) s = repair(s);
  s = detruecase(truecase, s);
  return detokenize(s);
}

}  // namespace cyclemt
