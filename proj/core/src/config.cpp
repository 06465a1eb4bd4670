#include "cyclemt/config.hpp"

#include <fstream>
#include <sstream>

#include "cyclemt/error.hpp"
#include "numfmt.hpp"

namespace cyclemt {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split_commas(std::string_view s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto comma = s.find(',', start);
    const auto piece = trim(s.substr(start, comma == std::string_view::npos ? s.size() - start : comma - start));
    if (!piece.empty()) out.emplace_back(piece);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

}  // namespace

Config Config::parse(std::string_view text, std::string_view origin) {
  Config cfg;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    const auto line = trim(text.substr(pos, nl == std::string_view::npos ? text.size() - pos : nl - pos));
    ++line_no;
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw FormatError(std::string(origin) + ":" + std::to_string(line_no) + ": expected key=value");
    }
    const auto key = trim(line.substr(0, eq));
    if (key.empty()) {
      throw FormatError(std::string(origin) + ":" + std::to_string(line_no) + ": empty key");
    }
    const auto [it, inserted] = cfg.values_.emplace(key, trim(line.substr(eq + 1)));
    if (!inserted) {
      throw FormatError(std::string(origin) + ":" + std::to_string(line_no) + ": duplicate key '" +
                        std::string(key) + "'");
    }
  }
  return cfg;
}

Config Config::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path.string());
}

std::string Config::get(std::string_view key, std::string_view fallback) const {
  const auto it = values_.find(std::string(key));
  return it == values_.end() ? std::string(fallback) : it->second;
}

double Config::get_double(std::string_view key, double fallback) const {
  const auto it = values_.find(std::string(key));
  if (it == values_.end()) return fallback;
  try {
    return numfmt::parse(it->second);
  } catch (const FormatError&) {
    throw FormatError("config key '" + std::string(key) + "': expected a number, got '" + it->second + "'");
  }
}

long long Config::get_int(std::string_view key, long long fallback) const {
  const auto it = values_.find(std::string(key));
  if (it == values_.end()) return fallback;
  std::size_t used = 0;
  long long v = 0;
  try {
    v = std::stoll(it->second, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != it->second.size()) {
    throw FormatError("config key '" + std::string(key) + "': expected an integer, got '" + it->second + "'");
  }
  return v;
}

std::size_t Config::get_size(std::string_view key, std::size_t fallback) const {
  const long long v = get_int(key, static_cast<long long>(fallback));
  if (v < 0) throw FormatError("config key '" + std::string(key) + "' must be >= 0");
  return static_cast<std::size_t>(v);
}

bool Config::get_bool(std::string_view key, bool fallback) const {
  const auto it = values_.find(std::string(key));
  if (it == values_.end()) return fallback;
  const auto& v = it->second;
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  throw FormatError("config key '" + std::string(key) + "': expected a boolean, got '" + v + "'");
}

std::vector<double> Config::get_doubles(std::string_view key, std::vector<double> fallback) const {
  const auto it = values_.find(std::string(key));
  if (it == values_.end()) return fallback;
  std::vector<double> out;
  for (const auto& piece : split_commas(it->second)) out.push_back(numfmt::parse(piece));
  return out;
}

std::vector<std::string> Config::get_list(std::string_view key,
                                          std::vector<std::string> fallback) const {
  const auto it = values_.find(std::string(key));
  if (it == values_.end()) return fallback;
  return split_commas(it->second);
}

Config Config::scoped(std::string_view prefix) const {
  Config out;
  for (const auto& [k, v] : values_) {
    if (k.size() > prefix.size() && k.compare(0, prefix.size(), prefix) == 0) {
      out.values_.emplace(k.substr(prefix.size()), v);
    }
  }
  return out;
}

std::string Config::canonical() const {
  std::string out;
  for (const auto& [k, v] : values_) out += k + "=" + v + "\n";
  return out;
}

}  // namespace cyclemt
