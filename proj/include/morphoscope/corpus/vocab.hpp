#pragma once

#include "morphoscope/corpus/utf8.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace morphoscope {

using CharId = std::uint32_t;

// Character <-> index map. Index 0 is UNK; the remaining symbols appear in
// first-occurrence order of the text the vocabulary was built from.
class Vocab {
 public:
  static constexpr CharId kUnk = 0;
  static constexpr char32_t kUnkSymbol = 0xFFFD;

  Vocab() : symbols_{kUnkSymbol} {}

  static Vocab build(std::u32string_view text) {
    if (text.empty()) {
      throw std::invalid_argument("build_vocab: empty stream");
    }
    Vocab v;
    for (char32_t c : text) {
      v.add(c);
    }
    return v;
  }

  // Rebuilds a vocabulary from its stored symbol order (index 0 must be UNK).
  static Vocab from_symbols(std::vector<char32_t> symbols) {
    if (symbols.empty() || symbols[0] != kUnkSymbol) {
      throw std::invalid_argument("Vocab: symbol list must start with the UNK symbol");
    }
    Vocab v;
    for (std::size_t i = 1; i < symbols.size(); ++i) {
      if (v.index_.count(symbols[i]) || symbols[i] == kUnkSymbol) {
        throw std::invalid_argument("Vocab: duplicate symbol");
      }
      v.add(symbols[i]);
    }
    return v;
  }

  std::size_t size() const noexcept { return symbols_.size(); }
  const std::vector<char32_t>& symbols() const noexcept { return symbols_; }

  bool contains(char32_t c) const { return index_.count(c) != 0; }

  CharId id(char32_t c) const {
    auto it = index_.find(c);
    return it == index_.end() ? kUnk : it->second;
  }

  std::optional<CharId> find(char32_t c) const {
    auto it = index_.find(c);
    if (it == index_.end()) {
      return std::nullopt;
    }
    return it->second;
  }

  char32_t symbol(CharId id) const {
    if (id >= symbols_.size()) {
      throw std::out_of_range("Vocab: index " + std::to_string(id) + " out of range");
    }
    return symbols_[id];
  }

  std::vector<CharId> encode(std::u32string_view text) const {
    std::vector<CharId> out;
    out.reserve(text.size());
    for (char32_t c : text) {
      out.push_back(id(c));
    }
    return out;
  }

  std::vector<CharId> encode_utf8(std::string_view text) const { return encode(utf8_decode(text)); }

  std::u32string decode(std::span<const CharId> ids) const {
    std::u32string out;
    out.reserve(ids.size());
    for (CharId i : ids) {
      out.push_back(symbol(i));
    }
    return out;
  }

  bool operator==(const Vocab& other) const { return symbols_ == other.symbols_; }

 private:
  void add(char32_t c) {
    if (c == kUnkSymbol || index_.count(c)) {
      return;
    }
    index_.emplace(c, static_cast<CharId>(symbols_.size()));
    symbols_.push_back(c);
  }

  std::vector<char32_t> symbols_;
  std::unordered_map<char32_t, CharId> index_;
};

}  // namespace morphoscope
