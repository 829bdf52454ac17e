#pragma once

#include "morphoscope/corpus/utf8.hpp"
#include "morphoscope/errors.hpp"

#include <algorithm>
#include <array>
#include <istream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace morphoscope {

inline constexpr std::array<std::string_view, 17> kUposTags = {
    "ADJ", "ADP", "ADV", "AUX", "CCONJ", "DET", "INTJ", "NOUN", "NUM",
    "PART", "PRON", "PROPN", "PUNCT", "SCONJ", "SYM", "VERB", "X"};

inline bool is_upos(std::string_view tag) {
  return std::find(kUposTags.begin(), kUposTags.end(), tag) != kUposTags.end();
}

struct TaggedToken {
  std::u32string form;
  std::string upos;
};

struct TaggedSentence {
  std::vector<TaggedToken> tokens;
};

// FORM (column 2) and UPOS (column 4) of every syntactic word. Comment lines,
// multiword-token ranges (1-2) and empty nodes (1.1) are skipped.
inline std::vector<TaggedSentence> parse_conllu(std::istream& in) {
  std::vector<TaggedSentence> out;
  TaggedSentence current;
  std::string line;
  std::size_t lineno = 0;
  auto flush = [&] {
    if (!current.tokens.empty()) {
      out.push_back(std::move(current));
      current = {};
    }
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') {
      line.pop_back();
    }
    if (line.find_first_not_of(" \t") == std::string::npos) {
      flush();
      continue;
    }
    if (line[0] == '#') {
      continue;
    }
    std::vector<std::string> cols;
    std::size_t start = 0;
    while (true) {
      const auto tab = line.find('\t', start);
      cols.push_back(line.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
      if (tab == std::string::npos) {
        break;
      }
      start = tab + 1;
    }
    if (cols.size() < 10) {
      throw ParseError(lineno, "token line has " + std::to_string(cols.size()) + " columns, expected 10");
    }
    const std::string& id = cols[0];
    if (id.find('-') != std::string::npos || id.find('.') != std::string::npos) {
      continue;
    }
    if (cols[1].empty()) {
      throw ParseError(lineno, "empty FORM");
    }
    if (!is_upos(cols[3])) {
      throw ParseError(lineno, "'" + cols[3] + "' is not a UPOS tag");
    }
    current.tokens.push_back({utf8_decode(cols[1]), cols[3]});
  }
  flush();
  return out;
}

inline std::vector<TaggedSentence> parse_conllu_file(const std::string& path) {
  std::istringstream in(read_file(path));
  return parse_conllu(in);
}

}  // namespace morphoscope
