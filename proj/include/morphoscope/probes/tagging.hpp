#pragma once

// POS probe (character -> tag). A sentence is its tokens joined by single
// spaces; every character carries its token's UPOS tag and spaces carry X.
// The word-level prediction is the tag at the word's last character.

#include "morphoscope/corpus/conllu.hpp"
#include "morphoscope/errors.hpp"
#include "morphoscope/numerics/rng.hpp"
#include "morphoscope/probes/decoder.hpp"
#include "morphoscope/probes/encode.hpp"
#include "morphoscope/report.hpp"

#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace morphoscope {

inline LabelVocab upos_labels() {
  std::vector<std::string> tags(kUposTags.begin(), kUposTags.end());
  return LabelVocab(std::move(tags));
}

inline constexpr const char* kSpaceTag = "X";

struct TagInstance {
  std::u32string text;
  std::vector<LabelId> labels;           // per character
  std::vector<std::size_t> word_ends;    // index of each token's last character
  std::vector<LabelId> word_tags;        // gold tag per token
};

inline TagInstance make_tag_instance(const TaggedSentence& s, const LabelVocab& labels) {
  TagInstance inst;
  const LabelId space = labels.id(kSpaceTag);
  for (std::size_t i = 0; i < s.tokens.size(); ++i) {
    if (i > 0) {
      inst.text.push_back(U' ');
      inst.labels.push_back(space);
    }
    const LabelId tag = labels.id(s.tokens[i].upos);
    for (char32_t c : s.tokens[i].form) {
      inst.text.push_back(c);
      inst.labels.push_back(tag);
    }
    inst.word_ends.push_back(inst.text.size() - 1);
    inst.word_tags.push_back(tag);
  }
  return inst;
}

inline std::vector<TagInstance> make_tag_instances(const std::vector<TaggedSentence>& sentences,
                                                   const LabelVocab& labels) {
  std::vector<TagInstance> out;
  out.reserve(sentences.size());
  for (const auto& s : sentences) {
    if (!s.tokens.empty()) {
      out.push_back(make_tag_instance(s, labels));
    }
  }
  return out;
}

// Seeded sentence-level split.
inline std::pair<std::vector<TaggedSentence>, std::vector<TaggedSentence>> split_sentences(
    std::vector<TaggedSentence> sentences, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0 && train_fraction < 1)) {
    throw std::invalid_argument("split_sentences: fraction must be in (0, 1)");
  }
  Rng rng(seed);
  rng.shuffle(sentences.begin(), sentences.end());
  const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(sentences.size())));
  std::vector<TaggedSentence> train(std::make_move_iterator(sentences.begin()),
                                    std::make_move_iterator(sentences.begin() + static_cast<std::ptrdiff_t>(n_train)));
  std::vector<TaggedSentence> test(std::make_move_iterator(sentences.begin() + static_cast<std::ptrdiff_t>(n_train)),
                                   std::make_move_iterator(sentences.end()));
  return {std::move(train), std::move(test)};
}

struct TagResult {
  std::vector<LabelId> char_tags;
  std::vector<LabelId> word_tags;  // tag at each word's last character
};

inline TagResult tags_from_chars(std::vector<LabelId> char_tags, std::u32string_view text) {
  TagResult r;
  r.char_tags = std::move(char_tags);
  for (const Token& t : tokenize_whitespace(text)) {
    r.word_tags.push_back(r.char_tags[t.end - 1]);
  }
  return r;
}

// Per-character argmax tags for a sentence (tokens separated by spaces).
template <class T>
TagResult tag(const ProbeDecoder<T>& dec, const CharLM<T>& model, std::u32string_view sentence) {
  const auto states = encode_sentences(model, {std::u32string(sentence)});
  return tags_from_chars(argmax_rows(decoder_probs(dec, states[0])), sentence);
}

// Full label distribution per character; header `pos,char,<tags...>`.
template <class T>
Matrix<T> tag_distributions(const ProbeDecoder<T>& dec, const CharLM<T>& model, std::u32string_view text) {
  const auto states = encode_sentences(model, {std::u32string(text)});
  return decoder_probs(dec, states[0]);
}

template <class T>
std::string tag_evolution_csv(const ProbeDecoder<T>& dec, const Matrix<T>& probs, std::u32string_view text) {
  std::ostringstream out;
  out << "pos,char";
  for (const auto& l : dec.labels.labels()) {
    out << ',' << csv_field(l);
  }
  out << '\n';
  for (Eigen::Index r = 0; r < probs.rows(); ++r) {
    out << r << ',' << csv_field(utf8_encode(text[static_cast<std::size_t>(r)]));
    for (Eigen::Index c = 0; c < probs.cols(); ++c) {
      out << ',' << fmt_num(static_cast<double>(probs(r, c)));
    }
    out << '\n';
  }
  return out.str();
}

struct TagMetrics {
  double char_accuracy = 0;   // percent, non-space characters
  double word_accuracy = 0;   // percent, tag at each word's last character
  std::size_t chars = 0;
  std::size_t words = 0;
};

inline TagMetrics tag_metrics(const std::vector<TagInstance>& gold, const std::vector<TagResult>& pred) {
  if (gold.size() != pred.size()) {
    throw std::invalid_argument("tag_metrics: prediction count differs from gold");
  }
  std::size_t char_ok = 0, word_ok = 0;
  TagMetrics m;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const auto& g = gold[i];
    const auto& p = pred[i];
    if (p.char_tags.size() != g.labels.size() || p.word_tags.size() != g.word_tags.size()) {
      throw std::invalid_argument("tag_metrics: prediction length differs from gold");
    }
    for (std::size_t c = 0; c < g.text.size(); ++c) {
      if (g.text[c] == U' ') {
        continue;
      }
      ++m.chars;
      char_ok += p.char_tags[c] == g.labels[c];
    }
    for (std::size_t w = 0; w < g.word_tags.size(); ++w) {
      ++m.words;
      word_ok += p.word_tags[w] == g.word_tags[w];
    }
  }
  if (m.chars == 0 || m.words == 0) {
    throw UndefinedMetric("tag_metrics: empty test set");
  }
  m.char_accuracy = 100.0 * static_cast<double>(char_ok) / static_cast<double>(m.chars);
  m.word_accuracy = 100.0 * static_cast<double>(word_ok) / static_cast<double>(m.words);
  return m;
}

// Most frequent word-level tag in `train` (ties -> lower label id) and its
// accuracy on `test` when assigned to every word.
struct MajorityBaseline {
  LabelId tag = 0;
  double accuracy = 0;  // percent
};

inline MajorityBaseline majority_baseline(const std::vector<TagInstance>& train, const std::vector<TagInstance>& test) {
  std::map<LabelId, std::size_t> counts;
  for (const auto& s : train) {
    for (LabelId t : s.word_tags) {
      ++counts[t];
    }
  }
  if (counts.empty()) {
    throw UndefinedMetric("majority_baseline: empty training set");
  }
  MajorityBaseline b;
  std::size_t best = 0;
  for (const auto& [tag, n] : counts) {
    if (n > best) {
      best = n;
      b.tag = tag;
    }
  }
  std::size_t ok = 0, total = 0;
  for (const auto& s : test) {
    for (LabelId t : s.word_tags) {
      ++total;
      ok += t == b.tag;
    }
  }
  if (total == 0) {
    throw UndefinedMetric("majority_baseline: empty test set");
  }
  b.accuracy = 100.0 * static_cast<double>(ok) / static_cast<double>(total);
  return b;
}

template <class T>
std::vector<ProbeSequence<T>> tag_sequences(const CharLM<T>& model, const std::vector<TagInstance>& instances,
                                            std::size_t threads = 1) {
  std::vector<std::u32string> texts;
  texts.reserve(instances.size());
  for (const auto& i : instances) {
    texts.push_back(i.text);
  }
  auto states = encode_sentences(model, texts, 32, threads);
  std::vector<ProbeSequence<T>> out(instances.size());
  for (std::size_t i = 0; i < instances.size(); ++i) {
    out[i].states = std::move(states[i]);
    out[i].labels = instances[i].labels;
  }
  return out;
}

template <class T>
std::vector<TagResult> predict_tags(const ProbeDecoder<T>& dec, const std::vector<TagInstance>& instances,
                                    const std::vector<ProbeSequence<T>>& encoded) {
  std::vector<TagResult> out;
  out.reserve(instances.size());
  for (std::size_t i = 0; i < instances.size(); ++i) {
    TagResult r;
    r.char_tags = argmax_rows(decoder_probs(dec, encoded[i].states));
    for (std::size_t e : instances[i].word_ends) {
      r.word_tags.push_back(r.char_tags[e]);
    }
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace morphoscope
