#pragma once

// Derivational suffix inventory and chain-rule suffix probabilities.

#include "morphoscope/charlm/model.hpp"
#include "morphoscope/corpus/utf8.hpp"

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace morphoscope {

// Base categories, in tie-breaking order.
enum class Category : std::uint8_t { NOUN = 0, VERB = 1, ADJ = 2 };
inline constexpr std::array<Category, 3> kCategories = {Category::NOUN, Category::VERB, Category::ADJ};

inline const char* category_name(Category c) {
  switch (c) {
    case Category::NOUN: return "NOUN";
    case Category::VERB: return "VERB";
    case Category::ADJ: return "ADJ";
  }
  return "?";
}

inline std::optional<Category> category_from_tag(std::string_view tag) {
  if (tag == "NOUN") return Category::NOUN;
  if (tag == "VERB") return Category::VERB;
  if (tag == "ADJ") return Category::ADJ;
  return std::nullopt;
}

enum class SelectionalClass : std::uint8_t { DENOMINAL, DEVERBAL, DEADJECTIVAL };

inline const char* class_name(SelectionalClass c) {
  switch (c) {
    case SelectionalClass::DENOMINAL: return "DENOMINAL";
    case SelectionalClass::DEVERBAL: return "DEVERBAL";
    case SelectionalClass::DEADJECTIVAL: return "DEADJECTIVAL";
  }
  return "?";
}

inline Category expected_category(SelectionalClass c) {
  switch (c) {
    case SelectionalClass::DENOMINAL: return Category::NOUN;
    case SelectionalClass::DEVERBAL: return Category::VERB;
    case SelectionalClass::DEADJECTIVAL: return Category::ADJ;
  }
  return Category::NOUN;
}

struct SuffixSpec {
  std::u32string surface;
  SelectionalClass cls = SelectionalClass::DENOMINAL;

  Category expected() const { return expected_category(cls); }
};

// Syntactically unambiguous derivational suffixes, grouped by the category
// they select for.
inline std::vector<SuffixSpec> default_suffixes() {
  using S = SelectionalClass;
  return {
      {U"ous", S::DENOMINAL},    {U"an", S::DENOMINAL},      {U"ic", S::DENOMINAL},   {U"ate", S::DENOMINAL},
      {U"ary", S::DENOMINAL},    {U"hood", S::DENOMINAL},    {U"less", S::DENOMINAL}, {U"ish", S::DENOMINAL},
      {U"ance", S::DEVERBAL},    {U"ment", S::DEVERBAL},     {U"ant", S::DEVERBAL},   {U"ory", S::DEVERBAL},
      {U"ive", S::DEVERBAL},     {U"ion", S::DEVERBAL},      {U"able", S::DEVERBAL},  {U"ably", S::DEVERBAL},
      {U"ness", S::DEADJECTIVAL}, {U"ity", S::DEADJECTIVAL}, {U"en", S::DEADJECTIVAL},
  };
}

inline bool ends_with_any_suffix(std::u32string_view word, const std::vector<SuffixSpec>& suffixes) {
  for (const auto& s : suffixes) {
    if (word.size() >= s.surface.size() && word.substr(word.size() - s.surface.size()) == s.surface) {
      return true;
    }
  }
  return false;
}

struct SuffixProbability {
  double probability = 1;
  std::vector<double> factors;  // p(s_k | history, s_1..s_{k-1})
};

// Joint probability of `ids` continuing from `state` (which has already
// consumed the history): the product of next-character conditionals.
template <class T>
SuffixProbability sequence_probability(const CharLM<T>& model, LstmState<T> state, std::span<const CharId> ids) {
  SuffixProbability r;
  r.factors.reserve(ids.size());
  for (CharId id : ids) {
    const Vector<T> p = model.next_distribution(state);
    const double f = static_cast<double>(p[id]);
    r.factors.push_back(f);
    r.probability *= f;
    model.step(id, state);
  }
  return r;
}

template <class T>
std::vector<CharId> suffix_ids(const CharLM<T>& model, std::u32string_view suffix) {
  std::vector<CharId> ids;
  ids.reserve(suffix.size());
  for (char32_t c : suffix) {
    const auto id = model.vocab().find(c);
    if (!id) {
      throw std::invalid_argument("suffix character '" + utf8_encode(c) + "' is not in the model vocabulary");
    }
    ids.push_back(*id);
  }
  return ids;
}

template <class T>
SuffixProbability suffix_probability(const CharLM<T>& model, const LstmState<T>& state, std::u32string_view suffix) {
  const auto ids = suffix_ids(model, suffix);
  return sequence_probability(model, state, std::span<const CharId>(ids));
}

// Convenience form: consumes `history` from the zero state first.
template <class T>
SuffixProbability suffix_probability(const CharLM<T>& model, std::u32string_view history, std::u32string_view suffix) {
  auto state = model.zero_state();
  const auto ids = model.vocab().encode(history);
  model.consume(ids, state);
  return suffix_probability(model, state, suffix);
}

}  // namespace morphoscope
