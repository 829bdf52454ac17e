#pragma once

#include "morphoscope/corpus/tokenize.hpp"

#include <cstddef>
#include <string>
#include <unordered_map>
#include <vector>

namespace morphoscope {

struct ContextedWord {
  std::u32string word;
  std::u32string context;  // preceding tokens joined by single spaces
  std::size_t occurrence = 0;  // token index of the word in the source corpus
};

// Token-level index over a corpus for repeated context lookups.
class ContextIndex {
 public:
  explicit ContextIndex(std::u32string_view corpus) : tokens_(tokenize_words(corpus)) {
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
      positions_[tokens_[i].text].push_back(i);
    }
  }

  const std::vector<Token>& tokens() const noexcept { return tokens_; }

  std::size_t count(const std::u32string& word) const {
    auto it = positions_.find(word);
    return it == positions_.end() ? 0 : it->second.size();
  }

  const std::vector<std::size_t>& occurrences(const std::u32string& word) const {
    static const std::vector<std::size_t> kNone;
    auto it = positions_.find(word);
    return it == positions_.end() ? kNone : it->second;
  }

  std::u32string left_context(std::size_t token_index, std::size_t window) const {
    const std::size_t first = token_index > window ? token_index - window : 0;
    std::u32string out;
    for (std::size_t i = first; i < token_index; ++i) {
      if (!out.empty()) {
        out.push_back(U' ');
      }
      out += tokens_[i].text;
    }
    return out;
  }

  // First `max_occurrences` exact-token occurrences of `word`, in corpus order.
  std::vector<ContextedWord> extract(const std::u32string& word, std::size_t max_occurrences = 15,
                                     std::size_t window = 15) const {
    std::vector<ContextedWord> out;
    for (std::size_t pos : occurrences(word)) {
      if (out.size() >= max_occurrences) {
        break;
      }
      out.push_back({word, left_context(pos, window), pos});
    }
    return out;
  }

 private:
  std::vector<Token> tokens_;
  std::unordered_map<std::u32string, std::vector<std::size_t>> positions_;
};

inline std::vector<ContextedWord> extract_contexts(std::u32string_view corpus, const std::u32string& word,
                                                   std::size_t max_occurrences = 15, std::size_t window = 15) {
  return ContextIndex(corpus).extract(word, max_occurrences, window);
}

}  // namespace morphoscope
