#pragma once

// Hidden-unit analysis: replay a stream through a trained LM and look at
// individual coordinates of h_t (the LSTM output, not the cell state).

#include "morphoscope/charlm/model.hpp"
#include "morphoscope/corpus/tokenize.hpp"
#include "morphoscope/numerics/stats.hpp"
#include "morphoscope/report.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <queue>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace morphoscope {

struct TriggerRecord {
  std::size_t unit = 0;
  double activation = 0;
  std::size_t position = 0;   // stream offset of the trigger character
  std::u32string context;     // up to `window` preceding chars + the trigger char
};

// Calls visit(t, h_t) for every position of the stream, starting from the
// zero state. Positions are processed in chunks of `chunk` characters; the
// chunking only bounds how many states are buffered.
template <class T>
void replay_hidden(const CharLM<T>& model, std::span<const CharId> stream, std::size_t chunk,
                   const std::function<void(std::size_t, const Vector<T>&)>& visit) {
  if (chunk == 0) {
    throw std::invalid_argument("replay_hidden: chunk must be positive");
  }
  auto state = model.zero_state();
  std::vector<Vector<T>> buffer;
  buffer.reserve(std::min(chunk, stream.size()));
  for (std::size_t first = 0; first < stream.size(); first += chunk) {
    const std::size_t last = std::min(stream.size(), first + chunk);
    buffer.clear();
    for (std::size_t t = first; t < last; ++t) {
      model.step(stream[t], state);
      buffer.push_back(state.h);
    }
    for (std::size_t t = first; t < last; ++t) {
      visit(t, buffer[t - first]);
    }
  }
}

namespace detail {

// Heap order: the "worst" kept record on top (smallest |a|; later position on ties).
struct TriggerWorse {
  bool operator()(const TriggerRecord& a, const TriggerRecord& b) const {
    const double x = std::abs(a.activation), y = std::abs(b.activation);
    if (x != y) {
      return x > y;
    }
    return a.position < b.position;
  }
};

inline bool trigger_before(const TriggerRecord& a, const TriggerRecord& b) {
  const double x = std::abs(a.activation), y = std::abs(b.activation);
  if (x != y) {
    return x > y;
  }
  return a.position < b.position;
}

}  // namespace detail

// For every unit, the k positions with the largest |h_t[unit]|, sorted by
// |activation| descending; ties go to the earlier position.
template <class T>
std::vector<std::vector<TriggerRecord>> top_triggers(const CharLM<T>& model, std::span<const CharId> stream,
                                                     std::size_t k = 5, std::size_t window = 13,
                                                     std::size_t chunk = 4096) {
  if (k < 1) {
    throw std::invalid_argument("top_triggers: k must be at least 1");
  }
  const std::size_t n = model.hidden_dim();
  using Heap = std::priority_queue<TriggerRecord, std::vector<TriggerRecord>, detail::TriggerWorse>;
  std::vector<Heap> heaps(n);
  const Vocab& vocab = model.vocab();
  replay_hidden<T>(model, stream, chunk, [&](std::size_t t, const Vector<T>& h) {
    for (std::size_t u = 0; u < n; ++u) {
      const double a = static_cast<double>(h[static_cast<Eigen::Index>(u)]);
      Heap& heap = heaps[u];
      if (heap.size() == k) {
        if (!(std::abs(a) > std::abs(heap.top().activation))) {
          continue;
        }
        heap.pop();
      }
      const std::size_t from = t >= window ? t - window : 0;
      heap.push({u, a, t, vocab.decode(stream.subspan(from, t + 1 - from))});
    }
  });
  std::vector<std::vector<TriggerRecord>> out(n);
  for (std::size_t u = 0; u < n; ++u) {
    while (!heaps[u].empty()) {
      out[u].push_back(heaps[u].top());
      heaps[u].pop();
    }
    std::sort(out[u].begin(), out[u].end(), detail::trigger_before);
  }
  return out;
}

inline Json trigger_report_json(const std::vector<std::vector<TriggerRecord>>& triggers) {
  Json arr = Json::array();
  for (std::size_t u = 0; u < triggers.size(); ++u) {
    Json records = Json::array();
    for (const auto& r : triggers[u]) {
      records.push_back({{"activation", round6(r.activation)},
                         {"context", utf8_encode(r.context)},
                         {"position", r.position}});
    }
    arr.push_back({{"unit", u}, {"records", std::move(records)}});
  }
  return arr;
}

struct ActivationTrace {
  std::u32string query;
  std::size_t unit = 0;
  std::vector<double> values;  // h_t[unit] after each character of the query
};

// The query is read from the zero state after a single priming space, so the
// first character is seen at a word start.
template <class T>
ActivationTrace trace_unit(const CharLM<T>& model, std::size_t unit, std::u32string_view query) {
  if (unit >= model.hidden_dim()) {
    throw std::invalid_argument("trace_unit: unit " + std::to_string(unit) + " out of range for n = " +
                                std::to_string(model.hidden_dim()));
  }
  ActivationTrace tr{std::u32string(query), unit, {}};
  auto state = model.zero_state();
  model.step(model.vocab().id(U' '), state);
  for (char32_t c : query) {
    model.step(model.vocab().id(c), state);
    tr.values.push_back(static_cast<double>(state.h[static_cast<Eigen::Index>(unit)]));
  }
  return tr;
}

inline std::string trace_csv(const ActivationTrace& tr) {
  std::ostringstream out;
  out << "pos,char,activation,is_word_end\n";
  const auto ends = word_end_flags(tr.query);
  for (std::size_t i = 0; i < tr.values.size(); ++i) {
    out << i << ',' << csv_field(utf8_encode(tr.query[i])) << ',' << fmt_num(tr.values[i]) << ','
        << (ends[i] ? 1 : 0) << '\n';
  }
  return out.str();
}

// Pearson r between h_t[unit] and p(space | h_t) over every position.
template <class T>
double correlate_with_space(const CharLM<T>& model, std::span<const CharId> stream, std::size_t unit,
                            std::size_t chunk = 4096) {
  if (stream.size() < 2) {
    throw std::invalid_argument("correlate_with_space: stream needs at least 2 characters");
  }
  if (unit >= model.hidden_dim()) {
    throw std::invalid_argument("correlate_with_space: unit out of range");
  }
  const auto space = model.vocab().find(U' ');
  if (!space) {
    throw std::invalid_argument("correlate_with_space: vocabulary has no space character");
  }
  RunningCovariance acc;
  const auto u = static_cast<Eigen::Index>(unit);
  replay_hidden<T>(model, stream, chunk, [&](std::size_t, const Vector<T>& h) {
    LstmState<T> st{h, h};
    const Vector<T> probs = model.next_distribution(st);
    acc.add(static_cast<double>(h[u]), static_cast<double>(probs[*space]));
  });
  return acc.pearson();
}

struct UnitScore {
  std::size_t unit = 0;
  double score = 0;       // (mean at word ends - mean elsewhere) / std
  double mean_end = 0;
  double mean_other = 0;
  double std = 0;
};

// Accumulates per-unit activation sums split by a word-end flag.
class BoundaryAlignment {
 public:
  explicit BoundaryAlignment(std::size_t units)
      : sum_end_(units, 0.0), sum_other_(units, 0.0), moments_(units) {}

  template <class Vec>
  void add(const Vec& h, bool word_end) {
    for (std::size_t u = 0; u < sum_end_.size(); ++u) {
      const double a = static_cast<double>(h[static_cast<Eigen::Index>(u)]);
      (word_end ? sum_end_ : sum_other_)[u] += a;
      moments_[u].add(a, 0.0);
    }
    (word_end ? n_end_ : n_other_) += 1;
  }

  // Units with zero activation variance are left out; sorted by |score|
  // descending (the sign says whether the unit rises or dips at word ends),
  // ties by unit index.
  std::vector<UnitScore> ranked() const {
    std::vector<UnitScore> out;
    if (n_end_ == 0 || n_other_ == 0) {
      throw UndefinedMetric("rank_units_by_boundary_alignment: need both word-final and other positions");
    }
    for (std::size_t u = 0; u < sum_end_.size(); ++u) {
      const double sd = moments_[u].std_x();
      if (!(sd > 0)) {
        continue;
      }
      UnitScore s;
      s.unit = u;
      s.mean_end = sum_end_[u] / static_cast<double>(n_end_);
      s.mean_other = sum_other_[u] / static_cast<double>(n_other_);
      s.std = sd;
      s.score = (s.mean_end - s.mean_other) / sd;
      out.push_back(s);
    }
    std::stable_sort(out.begin(), out.end(),
                     [](const UnitScore& a, const UnitScore& b) { return std::abs(a.score) > std::abs(b.score); });
    return out;
  }

 private:
  std::vector<double> sum_end_, sum_other_;
  std::vector<RunningCovariance> moments_;
  std::size_t n_end_ = 0, n_other_ = 0;
};

// From a precomputed activation table (rows = positions, cols = units).
template <class T>
std::vector<UnitScore> rank_units_by_boundary_alignment(const Matrix<T>& activations,
                                                        const std::vector<bool>& word_end) {
  if (static_cast<std::size_t>(activations.rows()) != word_end.size()) {
    throw std::invalid_argument("rank_units_by_boundary_alignment: flags do not match activation rows");
  }
  BoundaryAlignment acc(static_cast<std::size_t>(activations.cols()));
  for (Eigen::Index t = 0; t < activations.rows(); ++t) {
    acc.add(activations.row(t), word_end[static_cast<std::size_t>(t)]);
  }
  return acc.ranked();
}

template <class T>
std::vector<UnitScore> rank_units_by_boundary_alignment(const CharLM<T>& model, std::u32string_view corpus,
                                                        std::size_t chunk = 4096) {
  const auto ids = model.vocab().encode(corpus);
  const auto ends = word_end_flags(corpus);
  BoundaryAlignment acc(model.hidden_dim());
  replay_hidden<T>(model, ids, chunk, [&](std::size_t t, const Vector<T>& h) { acc.add(h, ends[t]); });
  return acc.ranked();
}

inline Json unit_ranking_json(const std::vector<UnitScore>& scores) {
  Json arr = Json::array();
  for (const auto& s : scores) {
    arr.push_back({{"unit", s.unit},
                   {"score", round6(s.score)},
                   {"mean_word_end", round6(s.mean_end)},
                   {"mean_other", round6(s.mean_other)},
                   {"std", round6(s.std)}});
  }
  return arr;
}

}  // namespace morphoscope
