#pragma once

// Morphological segmentation probe (character -> morpheme boundary).
//
// Every character of the target word gets a binary label: 1 if a boundary
// follows it. The last character is always 1 (the word ends there); those
// positions are scored separately as the EOW setting, internal positions as
// everything else.

#include "morphoscope/corpus/contexts.hpp"
#include "morphoscope/corpus/segmentation.hpp"
#include "morphoscope/corpus/wordlist.hpp"
#include "morphoscope/errors.hpp"
#include "morphoscope/numerics/rng.hpp"
#include "morphoscope/probes/decoder.hpp"
#include "morphoscope/probes/encode.hpp"
#include "morphoscope/report.hpp"

#include <array>
#include <set>
#include <string>
#include <vector>

namespace morphoscope {

inline constexpr LabelId kNoBoundary = 0;
inline constexpr LabelId kBoundaryAfter = 1;

inline LabelVocab segmentation_labels() { return LabelVocab({"NO_BOUNDARY", "BOUNDARY_AFTER"}); }

inline const std::vector<std::u32string>& default_prefixes() {
  static const std::vector<std::u32string> kPrefixes = {
      U"a",   U"un",  U"in",  U"im",   U"il",   U"ir",    U"dis",   U"mis",  U"re",  U"pre", U"de",
      U"non", U"anti", U"over", U"under", U"out", U"sub", U"inter", U"trans", U"mid", U"co",  U"fore"};
  return kPrefixes;
}

struct SegInstance {
  ContextedWord word;
  std::set<std::size_t> gold;     // internal boundaries, in [1, len-1]
  std::vector<LabelId> labels;    // one per character of the word
};

inline std::vector<LabelId> boundary_labels(std::size_t length, const std::set<std::size_t>& boundaries) {
  std::vector<LabelId> labels(length, kNoBoundary);
  for (std::size_t b : boundaries) {
    if (b == 0 || b >= length) {
      throw std::invalid_argument("boundary_labels: internal boundary " + std::to_string(b) + " out of range");
    }
    labels[b - 1] = kBoundaryAfter;
  }
  if (length > 0) {
    labels[length - 1] = kBoundaryAfter;
  }
  return labels;
}

// One instance per corpus occurrence (up to max_occurrences, each with up to
// `window` preceding tokens). Words never seen in the corpus get a single
// context-free instance so they are still scored.
inline std::vector<SegInstance> make_seg_instances(const std::vector<SegRecord>& records, const ContextIndex& index,
                                                   std::size_t max_occurrences = 15, std::size_t window = 15) {
  std::vector<SegInstance> out;
  for (const auto& r : records) {
    auto contexts = index.extract(r.surface, max_occurrences, window);
    if (contexts.empty()) {
      contexts.push_back({r.surface, U"", 0});
    }
    for (auto& cw : contexts) {
      out.push_back({std::move(cw), r.boundaries, boundary_labels(r.surface.size(), r.boundaries)});
    }
  }
  return out;
}

// Seeded split by word type: every occurrence of a form lands on one side.
struct RecordSplit {
  std::vector<SegRecord> train;
  std::vector<SegRecord> test;
};

inline RecordSplit split_by_type(std::vector<SegRecord> records, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0 && train_fraction < 1)) {
    throw std::invalid_argument("split_by_type: fraction must be in (0, 1)");
  }
  // Deduplicate surfaces first (first analysis wins) so a type cannot straddle the split.
  std::vector<SegRecord> unique;
  std::set<std::u32string> seen;
  for (auto& r : records) {
    if (seen.insert(r.surface).second) {
      unique.push_back(std::move(r));
    }
  }
  Rng rng(seed);
  rng.shuffle(unique.begin(), unique.end());
  const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(unique.size())));
  RecordSplit s;
  s.train.assign(std::make_move_iterator(unique.begin()),
                 std::make_move_iterator(unique.begin() + static_cast<std::ptrdiff_t>(n_train)));
  s.test.assign(std::make_move_iterator(unique.begin() + static_cast<std::ptrdiff_t>(n_train)),
                std::make_move_iterator(unique.end()));
  return s;
}

enum class BoundaryClass { WE, NOT_WE, EOW };

struct BoundaryInfo {
  BoundaryClass cls = BoundaryClass::NOT_WE;
  bool prefix = false;
};

inline const char* boundary_class_name(BoundaryClass c) {
  switch (c) {
    case BoundaryClass::WE: return "WE";
    case BoundaryClass::NOT_WE: return "NOT_WE";
    case BoundaryClass::EOW: return "EOW";
  }
  return "?";
}

// `position` counts characters before the boundary (1..len). The left
// segment decides the class: the whole word -> EOW; a corpus word
// (case-folded) -> WE; otherwise NOT_WE. PREFIX is flagged when the left
// segment is in the prefix list.
inline BoundaryInfo classify_boundary(std::u32string_view word, std::size_t position, const WordSet& corpus_words,
                                      const std::vector<std::u32string>& prefixes = default_prefixes()) {
  if (position < 1 || position > word.size()) {
    throw std::invalid_argument("classify_boundary: position " + std::to_string(position) + " outside [1, " +
                                std::to_string(word.size()) + "]");
  }
  const std::u32string left(word.substr(0, position));
  BoundaryInfo info;
  if (position == word.size()) {
    info.cls = BoundaryClass::EOW;
  } else {
    info.cls = corpus_words.contains(left, CaseMode::Folded) ? BoundaryClass::WE : BoundaryClass::NOT_WE;
  }
  const std::u32string folded = fold_case(left);
  for (const auto& p : prefixes) {
    if (folded == p) {
      info.prefix = true;
      break;
    }
  }
  return info;
}

// Predicted segmentation of one scored occurrence.
struct SegPrediction {
  std::u32string word;
  std::set<std::size_t> gold;       // internal gold boundaries
  std::set<std::size_t> predicted;  // internal predicted boundaries
  bool predicted_eow = false;       // boundary predicted after the last character
};

inline SegPrediction prediction_from_labels(const SegInstance& inst, const std::vector<LabelId>& labels) {
  if (labels.size() != inst.word.word.size()) {
    throw std::invalid_argument("prediction_from_labels: label sequence length differs from word length");
  }
  SegPrediction p{inst.word.word, inst.gold, {}, false};
  for (std::size_t i = 0; i + 1 < labels.size(); ++i) {
    if (labels[i] == kBoundaryAfter) {
      p.predicted.insert(i + 1);
    }
  }
  p.predicted_eow = !labels.empty() && labels.back() == kBoundaryAfter;
  return p;
}

// Argmax boundary labels for one instance.
template <class T>
SegPrediction segment(const ProbeDecoder<T>& dec, const CharLM<T>& model, const SegInstance& inst) {
  const Matrix<T> probs = decoder_probs(dec, encode_contexted(model, inst.word));
  return prediction_from_labels(inst, argmax_rows(probs));
}

enum class SegSetting { ALL, WE, NOT_WE, EOW, NO_PREF };
inline constexpr std::array<SegSetting, 5> kSegSettings = {SegSetting::ALL, SegSetting::WE, SegSetting::NOT_WE,
                                                           SegSetting::EOW, SegSetting::NO_PREF};

inline const char* seg_setting_name(SegSetting s) {
  switch (s) {
    case SegSetting::ALL: return "ALL";
    case SegSetting::WE: return "WE";
    case SegSetting::NOT_WE: return "NOT_WE";
    case SegSetting::EOW: return "EOW";
    case SegSetting::NO_PREF: return "NO_PREF";
  }
  return "?";
}

struct SegScores {
  std::size_t tp = 0, fp = 0, fn = 0;
  double precision = 0, recall = 0, f1 = 0;  // percentages
  std::size_t support = 0;                   // gold boundaries in the setting
};

// Harmonic mean of two percentages.
inline double f1_from_pr(double precision, double recall) {
  return precision + recall > 0 ? 2 * precision * recall / (precision + recall) : 0.0;
}

inline SegScores scores_from_counts(std::size_t tp, std::size_t fp, std::size_t fn, const char* setting) {
  if (tp + fn == 0) {
    throw UndefinedMetric(std::string("seg_metrics: no gold boundaries in setting ") + setting);
  }
  SegScores s{tp, fp, fn, 0, 0, 0, tp + fn};
  s.precision = tp + fp > 0 ? 100.0 * static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  s.recall = 100.0 * static_cast<double>(tp) / static_cast<double>(tp + fn);
  s.f1 = f1_from_pr(s.precision, s.recall);
  return s;
}

// Boundary-level P/R/F1, micro-averaged over occurrences. Internal settings
// restrict gold and predicted positions alike by the position's class;
// NO_PREF drops prefix boundaries from both sides.
inline SegScores seg_metrics(const std::vector<SegPrediction>& preds, SegSetting setting, const WordSet& corpus_words,
                             const std::vector<std::u32string>& prefixes = default_prefixes()) {
  std::size_t tp = 0, fp = 0, fn = 0;
  if (setting == SegSetting::EOW) {
    for (const auto& p : preds) {
      // The gold side always has a boundary at the end of the word.
      (p.predicted_eow ? tp : fn) += 1;
    }
    return scores_from_counts(tp, fp, fn, seg_setting_name(setting));
  }
  auto keep = [&](const std::u32string& word, std::size_t pos) {
    if (setting == SegSetting::ALL) {
      return true;
    }
    const auto info = classify_boundary(word, pos, corpus_words, prefixes);
    switch (setting) {
      case SegSetting::WE: return info.cls == BoundaryClass::WE;
      case SegSetting::NOT_WE: return info.cls == BoundaryClass::NOT_WE;
      case SegSetting::NO_PREF: return !info.prefix;
      default: return true;
    }
  };
  for (const auto& p : preds) {
    for (std::size_t b : p.gold) {
      if (keep(p.word, b)) {
        (p.predicted.count(b) ? tp : fn) += 1;
      }
    }
    for (std::size_t b : p.predicted) {
      if (!p.gold.count(b) && keep(p.word, b)) {
        ++fp;
      }
    }
  }
  return scores_from_counts(tp, fp, fn, seg_setting_name(setting));
}

// All five settings; settings without gold boundaries are reported with
// null scores.
inline Json seg_report_json(const std::vector<SegPrediction>& preds, const WordSet& corpus_words,
                            const std::vector<std::u32string>& prefixes = default_prefixes()) {
  Json j = Json::object();
  for (SegSetting s : kSegSettings) {
    try {
      const auto sc = seg_metrics(preds, s, corpus_words, prefixes);
      j[seg_setting_name(s)] = {{"precision", round6(sc.precision)},
                                {"recall", round6(sc.recall)},
                                {"f1", round6(sc.f1)},
                                {"support", sc.support}};
    } catch (const UndefinedMetric&) {
      j[seg_setting_name(s)] = {{"precision", nullptr}, {"recall", nullptr}, {"f1", nullptr}, {"support", 0}};
    }
  }
  return j;
}

// Encodes instances and pairs them with their gold labels.
template <class T>
std::vector<ProbeSequence<T>> seg_sequences(const CharLM<T>& model, const std::vector<SegInstance>& instances,
                                            std::size_t threads = 1) {
  std::vector<ContextedWord> words;
  words.reserve(instances.size());
  for (const auto& i : instances) {
    words.push_back(i.word);
  }
  auto states = encode_contexted_batch(model, words, 64, threads);
  std::vector<ProbeSequence<T>> out(instances.size());
  for (std::size_t i = 0; i < instances.size(); ++i) {
    out[i].states = std::move(states[i]);
    out[i].labels = instances[i].labels;
  }
  return out;
}

template <class T>
std::vector<SegPrediction> predict_segmentations(const ProbeDecoder<T>& dec, const std::vector<SegInstance>& instances,
                                                 const std::vector<ProbeSequence<T>>& encoded) {
  std::vector<SegPrediction> out;
  out.reserve(instances.size());
  for (std::size_t i = 0; i < instances.size(); ++i) {
    out.push_back(prediction_from_labels(instances[i], argmax_rows(decoder_probs(dec, encoded[i].states))));
  }
  return out;
}

inline std::string format_segmentation(std::u32string_view word, const std::set<std::size_t>& boundaries) {
  std::u32string out;
  for (std::size_t i = 0; i < word.size(); ++i) {
    if (boundaries.count(i)) {
      out.push_back(U'+');
    }
    out.push_back(word[i]);
  }
  return utf8_encode(out);
}

}  // namespace morphoscope
