#pragma once

#include "morphoscope/corpus/tokenize.hpp"
#include "morphoscope/corpus/utf8.hpp"

#include <fstream>
#include <string>
#include <unordered_set>
#include <vector>

namespace morphoscope {

enum class CaseMode { Exact, Folded };

class WordSet {
 public:
  WordSet() = default;

  void insert(const std::u32string& w) {
    exact_.insert(w);
    folded_.insert(fold_case(w));
  }

  bool contains(const std::u32string& w, CaseMode mode = CaseMode::Exact) const {
    return mode == CaseMode::Exact ? exact_.count(w) != 0 : folded_.count(fold_case(w)) != 0;
  }

  bool contains_utf8(const std::string& w, CaseMode mode = CaseMode::Exact) const {
    return contains(utf8_decode(w), mode);
  }

  std::size_t size() const noexcept { return exact_.size(); }
  bool empty() const noexcept { return exact_.empty(); }

  void merge(const WordSet& other) {
    for (const auto& w : other.exact_) {
      insert(w);
    }
  }

 private:
  std::unordered_set<std::u32string> exact_;
  std::unordered_set<std::u32string> folded_;
};

// One word per line; surrounding whitespace trimmed, blank lines skipped.
inline WordSet load_wordlist(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot read word list " + path);
  }
  WordSet set;
  std::string line;
  while (std::getline(in, line)) {
    const auto first = line.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) {
      continue;
    }
    const auto last = line.find_last_not_of(" \t\r\n");
    set.insert(utf8_decode(line.substr(first, last - first + 1)));
  }
  return set;
}

// The set of word tokens of a text.
inline WordSet token_set(std::u32string_view text) {
  WordSet set;
  for (const Token& t : tokenize_words(text)) {
    set.insert(t.text);
  }
  return set;
}

}  // namespace morphoscope
