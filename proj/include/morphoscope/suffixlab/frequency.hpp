#pragma once

// How often a suffixed word's base also occurs on its own in the corpus.

#include "morphoscope/corpus/tokenize.hpp"
#include "morphoscope/corpus/utf8.hpp"
#include "morphoscope/report.hpp"
#include "morphoscope/suffixlab/suffixes.hpp"

#include <set>
#include <string>
#include <unordered_map>
#include <vector>

namespace morphoscope {

using TokenCounts = std::unordered_map<std::u32string, std::size_t>;

inline TokenCounts token_counts(std::u32string_view text) {
  TokenCounts counts;
  for (const Token& t : tokenize_words(text)) {
    ++counts[t.text];
  }
  return counts;
}

// Endings appended to a stripped remainder when looking for its base:
// as-is, +e, +s, +es, +ed.
inline std::vector<std::u32string> default_recovery_rules() { return {U"", U"e", U"s", U"es", U"ed"}; }

struct SuffixFrequency {
  std::size_t suffixed = 0;    // token occurrences ending in the suffix (with a non-empty remainder)
  std::size_t standalone = 0;  // occurrences of recovered bases, once per distinct remainder
};

inline SuffixFrequency suffix_frequency(const TokenCounts& counts, std::u32string_view suffix,
                                        const std::vector<std::u32string>& rules = default_recovery_rules()) {
  SuffixFrequency f;
  if (suffix.empty()) {
    return f;
  }
  std::set<std::u32string> remainders;
  for (const auto& [tok, n] : counts) {
    if (tok.size() > suffix.size() && std::u32string_view(tok).substr(tok.size() - suffix.size()) == suffix) {
      f.suffixed += n;
      remainders.insert(tok.substr(0, tok.size() - suffix.size()));
    }
  }
  for (const auto& rem : remainders) {
    const std::u32string suffixed_form = rem + std::u32string(suffix);
    std::set<std::u32string> forms;
    for (const auto& r : rules) {
      if (rem + r != suffixed_form) {
        forms.insert(rem + r);
      }
    }
    for (const auto& form : forms) {
      auto it = counts.find(form);
      if (it != counts.end()) {
        f.standalone += it->second;
      }
    }
  }
  return f;
}

inline Json suffix_frequency_json(const TokenCounts& counts, const std::vector<SuffixSpec>& suffixes,
                                  const std::vector<std::u32string>& rules = default_recovery_rules()) {
  Json rows = Json::array();
  for (const auto& s : suffixes) {
    const auto f = suffix_frequency(counts, s.surface, rules);
    rows.push_back({{"surface", utf8_encode(s.surface)},
                    {"class", class_name(s.cls)},
                    {"suffixed", f.suffixed},
                    {"standalone", f.standalone}});
  }
  return Json{{"suffixes", rows}};
}

}  // namespace morphoscope
