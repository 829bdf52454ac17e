#pragma once

#include "morphoscope/charlm/model.hpp"
#include "morphoscope/corpus/tokenize.hpp"
#include "morphoscope/corpus/wordlist.hpp"
#include "morphoscope/numerics/rng.hpp"

#include <cmath>
#include <deque>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace morphoscope {

// Draws from softmax(logits / temperature), never the UNK symbol.
template <class T>
CharId draw_next(const CharLM<T>& model, const LstmState<T>& state, double temperature, Rng& rng) {
  const Vector<T> z = model.logits(state);
  std::vector<double> w(static_cast<std::size_t>(z.size()));
  double hi = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 1; i < z.size(); ++i) {
    hi = std::max(hi, static_cast<double>(z[i]) / temperature);
  }
  for (Eigen::Index i = 1; i < z.size(); ++i) {
    w[static_cast<std::size_t>(i)] = std::exp(static_cast<double>(z[i]) / temperature - hi);
  }
  w[Vocab::kUnk] = 0;
  return static_cast<CharId>(rng.categorical(std::span<const double>(w)));
}

// Consumes `prefix`, then samples `length` characters.
template <class T>
std::u32string sample(const CharLM<T>& model, std::size_t length, double temperature, std::uint64_t seed,
                      std::u32string_view prefix = U"") {
  if (!(temperature > 0)) {
    throw std::invalid_argument("sample: temperature must be positive");
  }
  Rng rng(seed);
  auto state = model.zero_state();
  for (char32_t c : prefix) {
    model.step(model.vocab().id(c), state);
  }
  std::u32string out;
  out.reserve(length);
  for (std::size_t i = 0; i < length; ++i) {
    const CharId next = draw_next(model, state, temperature, rng);
    out.push_back(model.vocab().symbol(next));
    model.step(next, state);
  }
  return out;
}

struct SampledWord {
  std::u32string text;
  double mean_logprob = 0;   // mean natural-log model probability of its characters
  double p_delimiter = 0;    // model probability of the delimiter that ended it
  double p_space = 0;        // model probability of a space at the same point
  char32_t delimiter = U' ';
  std::u32string context;    // up to 15 preceding sampled tokens, space-joined
};

struct WordSampling {
  std::uint64_t seed = 0;
  double temperature = 1.0;
  std::size_t context_window = 15;
};

// Continuous sampled stream (primed with one space) cut into tokens that are
// bounded by delimiters on both sides.
template <class T>
class WordSampler {
 public:
  WordSampler(const CharLM<T>& model, const WordSampling& opts)
      : model_(model), opts_(opts), rng_(opts.seed), state_(model.zero_state()) {
    if (!(opts.temperature > 0)) {
      throw std::invalid_argument("WordSampler: temperature must be positive");
    }
    model_.step(model_.vocab().id(U' '), state_);
    space_ = model_.vocab().find(U' ');
  }

  // Next complete word, or nothing if `max_chars` more characters did not finish one.
  std::optional<SampledWord> next(std::size_t max_chars = 1000) {
    std::u32string current;
    double logprob = 0;
    for (std::size_t i = 0; i < max_chars; ++i) {
      const Vector<T> p = model_.next_distribution(state_);
      const CharId id = draw_next(model_, state_, opts_.temperature, rng_);
      const char32_t ch = model_.vocab().symbol(id);
      ++chars_;
      model_.step(id, state_);
      if (!is_delimiter(ch)) {
        current.push_back(ch);
        logprob += std::log(std::max(static_cast<double>(p[id]), 1e-12));
        continue;
      }
      if (current.empty()) {
        continue;
      }
      SampledWord w;
      w.text = current;
      w.mean_logprob = logprob / static_cast<double>(current.size());
      w.p_delimiter = static_cast<double>(p[id]);
      w.p_space = space_ ? static_cast<double>(p[*space_]) : 0.0;
      w.delimiter = ch;
      for (const auto& r : recent_) {
        if (!w.context.empty()) {
          w.context.push_back(U' ');
        }
        w.context += r;
      }
      recent_.push_back(current);
      if (recent_.size() > opts_.context_window) {
        recent_.pop_front();
      }
      return w;
    }
    return std::nullopt;
  }

  std::size_t chars_sampled() const noexcept { return chars_; }

 private:
  const CharLM<T>& model_;
  WordSampling opts_;
  Rng rng_;
  LstmState<T> state_;
  std::optional<CharId> space_;
  std::deque<std::u32string> recent_;
  std::size_t chars_ = 0;
};

// The first `count` complete words of a sampled stream. Stops early if
// `max_chars` characters (default 200 per word + 1000) are exhausted.
template <class T>
std::vector<SampledWord> sample_complete_words(const CharLM<T>& model, std::size_t count,
                                               const WordSampling& opts = {}, std::size_t max_chars = 0) {
  WordSampler<T> sampler(model, opts);
  const std::size_t budget = max_chars ? max_chars : 200 * count + 1000;
  std::vector<SampledWord> out;
  while (out.size() < count && sampler.chars_sampled() < budget) {
    auto w = sampler.next(budget - sampler.chars_sampled());
    if (!w) {
      break;
    }
    out.push_back(std::move(*w));
  }
  return out;
}

struct NonceRate {
  double rate = 0;
  std::size_t sampled = 0;
  std::size_t nonce = 0;
  std::vector<std::u32string> examples;  // first few nonce tokens
};

// Fraction of sampled tokens found neither in the training tokens (exact) nor
// in any dictionary (case-folded).
template <class T>
NonceRate nonce_rate(const CharLM<T>& model, const WordSet& training_tokens,
                     const std::vector<const WordSet*>& dictionaries, std::size_t sample_size,
                     std::uint64_t seed) {
  WordSampling opts;
  opts.seed = seed;
  const auto words = sample_complete_words(model, sample_size, opts);
  NonceRate r;
  r.sampled = words.size();
  for (const auto& w : words) {
    bool known = training_tokens.contains(w.text, CaseMode::Exact);
    for (const WordSet* d : dictionaries) {
      known = known || d->contains(w.text, CaseMode::Folded);
    }
    if (!known) {
      ++r.nonce;
      if (r.examples.size() < 50) {
        r.examples.push_back(w.text);
      }
    }
  }
  r.rate = r.sampled ? static_cast<double>(r.nonce) / static_cast<double>(r.sampled) : 0.0;
  return r;
}

}  // namespace morphoscope
