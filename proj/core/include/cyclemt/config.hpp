#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace cyclemt {

/// Flat key=value settings. Blank lines and lines starting with '#' are
/// ignored; keys are unique and whitespace around keys and values is trimmed.
class Config {
 public:
  Config() = default;

  static Config parse(std::string_view text, std::string_view origin = "<string>");
  static Config load(const std::filesystem::path& path);

  bool has(std::string_view key) const { return values_.count(std::string(key)) > 0; }
  void set(std::string_view key, std::string value) { values_[std::string(key)] = std::move(value); }

  std::string get(std::string_view key, std::string_view fallback) const;
  double get_double(std::string_view key, double fallback) const;
  std::size_t get_size(std::string_view key, std::size_t fallback) const;
  long long get_int(std::string_view key, long long fallback) const;
  bool get_bool(std::string_view key, bool fallback) const;
  /// Comma-separated reals.
  std::vector<double> get_doubles(std::string_view key, std::vector<double> fallback) const;
  /// Comma-separated words.
  std::vector<std::string> get_list(std::string_view key, std::vector<std::string> fallback) const;

  /// Entries whose key starts with `prefix`, with the prefix removed.
  Config scoped(std::string_view prefix) const;

  const std::map<std::string, std::string>& values() const { return values_; }
  /// Canonical "key=value\n" text, sorted by key.
  std::string canonical() const;

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace cyclemt
