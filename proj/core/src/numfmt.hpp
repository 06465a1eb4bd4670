#pragma once

#include <charconv>
#include <string>
#include <string_view>

#include "cyclemt/error.hpp"

namespace cyclemt::numfmt {

/// Shortest decimal form that parses back to the same double.
inline std::string format(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

inline double parse(std::string_view s) {
  double x = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), x);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
    throw FormatError("bad number '" + std::string(s) + "'");
  }
  return x;
}

}  // namespace cyclemt::numfmt
