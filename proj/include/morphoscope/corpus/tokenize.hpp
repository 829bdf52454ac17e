#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace morphoscope {

inline bool is_space_char(char32_t c) {
  switch (c) {
    case U' ': case U'\t': case U'\n': case U'\v': case U'\f': case U'\r':
    case 0x85: case 0xA0: case 0x1680: case 0x2028: case 0x2029: case 0x202F:
    case 0x205F: case 0x3000:
      return true;
    default:
      return c >= 0x2000 && c <= 0x200A;
  }
}

// Unicode general categories P* and S*, from a block table: exact for Latin-1
// and the punctuation/symbol blocks, approximate (whole-block) elsewhere.
inline bool is_punct_or_symbol(char32_t c) {
  if (c < 0x80) {
    return (c >= 0x21 && c <= 0x2F) || (c >= 0x3A && c <= 0x40) || (c >= 0x5B && c <= 0x60) ||
           (c >= 0x7B && c <= 0x7E);
  }
  if (c <= 0xFF) {
    if (c >= 0xA1 && c <= 0xBF) {
      return c != 0xAA && c != 0xAD && c != 0xB2 && c != 0xB3 && c != 0xB5 && c != 0xB9 &&
             c != 0xBA && !(c >= 0xBC && c <= 0xBE);
    }
    return c == 0xD7 || c == 0xF7;
  }
  struct Range {
    char32_t lo, hi;
  };
  static constexpr Range kRanges[] = {
      {0x2010, 0x2027}, {0x2030, 0x205E}, {0x207A, 0x207E}, {0x208A, 0x208E},
      {0x20A0, 0x20CF}, {0x2190, 0x23FF}, {0x2500, 0x27FF}, {0x2900, 0x2BFF},
      {0x2E00, 0x2E7F}, {0x3001, 0x3003}, {0x3008, 0x3011}, {0x3014, 0x301F},
      {0xFE10, 0xFE19}, {0xFE30, 0xFE4F}, {0xFF01, 0xFF0F}, {0xFF1A, 0xFF20},
      {0xFF3B, 0xFF40}, {0xFF5B, 0xFF65}, {0x1F300, 0x1FAFF},
  };
  for (const Range& r : kRanges) {
    if (c >= r.lo && c <= r.hi) {
      return true;
    }
  }
  return false;
}

inline bool is_delimiter(char32_t c) { return is_space_char(c) || is_punct_or_symbol(c); }

// Simple case mapping for ASCII and Latin-1.
inline char32_t fold_case(char32_t c) {
  if (c >= U'A' && c <= U'Z') {
    return c + 32;
  }
  if (c >= 0xC0 && c <= 0xDE && c != 0xD7) {
    return c + 32;
  }
  return c;
}

inline bool is_upper_char(char32_t c) { return fold_case(c) != c; }

inline bool is_lower_letter(char32_t c) {
  return (c >= U'a' && c <= U'z') || (c >= 0xDF && c <= 0xFF && c != 0xF7);
}

inline std::u32string fold_case(std::u32string_view s) {
  std::u32string out(s);
  for (char32_t& c : out) {
    c = fold_case(c);
  }
  return out;
}

inline bool is_all_lowercase(std::u32string_view s) {
  if (s.empty()) {
    return false;
  }
  for (char32_t c : s) {
    if (!is_lower_letter(c)) {
      return false;
    }
  }
  return true;
}

struct Token {
  std::u32string text;
  std::size_t start = 0;  // character offsets, half-open
  std::size_t end = 0;
};

// Maximal runs of characters that are neither space nor punctuation/symbol.
inline std::vector<Token> tokenize_words(std::u32string_view text) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < text.size()) {
    if (is_delimiter(text[i])) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < text.size() && !is_delimiter(text[j])) {
      ++j;
    }
    out.push_back({std::u32string(text.substr(i, j - i)), i, j});
    i = j;
  }
  return out;
}

// Maximal runs of non-space characters (punctuation stays attached).
inline std::vector<Token> tokenize_whitespace(std::u32string_view text) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < text.size()) {
    if (is_space_char(text[i])) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < text.size() && !is_space_char(text[j])) {
      ++j;
    }
    out.push_back({std::u32string(text.substr(i, j - i)), i, j});
    i = j;
  }
  return out;
}

// Per-character flags: true where the character ends a token.
inline std::vector<bool> word_end_flags(std::u32string_view text) {
  std::vector<bool> flags(text.size(), false);
  for (const Token& t : tokenize_words(text)) {
    flags[t.end - 1] = true;
  }
  return flags;
}

}  // namespace morphoscope
