#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace cyclemt::utf8 {

/// Decoded code point together with the byte range it occupies. Invalid
/// bytes decode one at a time with `valid == false`.
struct CodePoint {
  char32_t value;
  std::size_t offset;
  std::size_t length;
  bool valid;
};

std::vector<CodePoint> decode(std::string_view text);

/// Splits into code-point substrings (invalid bytes become single-byte pieces).
std::vector<std::string> split_chars(std::string_view text);

void append(std::string& out, char32_t cp);

bool is_ascii_space(char c);
bool is_punct(char32_t cp);
bool is_letter(char32_t cp);
bool is_digit(char32_t cp);

char32_t to_lower(char32_t cp);
char32_t to_upper(char32_t cp);

std::string lower(std::string_view text);
/// Upper-cases the first code point only.
std::string capitalize(std::string_view text);

}  // namespace cyclemt::utf8
