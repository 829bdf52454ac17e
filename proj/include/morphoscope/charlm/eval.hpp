#pragma once

#include "morphoscope/charlm/model.hpp"

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

namespace morphoscope {

// Mean -log2 p(c[t+1] | c[..t]) over the stream, state carried from the zero state.
template <class T>
double bits_per_char(const CharLM<T>& model, std::span<const CharId> stream) {
  if (stream.size() < 2) {
    throw std::invalid_argument("bits_per_char: stream needs at least 2 characters");
  }
  auto state = model.zero_state();
  double nats = 0;
  for (std::size_t t = 0; t + 1 < stream.size(); ++t) {
    model.step(stream[t], state);
    const Vector<T> p = model.next_distribution(state);
    model.check_id(stream[t + 1]);
    nats -= std::log(std::max(static_cast<double>(p[stream[t + 1]]), 1e-12));
  }
  return nats / static_cast<double>(stream.size() - 1) / std::log(2.0);
}

// Add-one unigram estimated on `train`, scored on positions 1.. of `eval`
// (the positions bits_per_char scores).
inline double unigram_bits_per_char(std::span<const CharId> train, std::span<const CharId> eval,
                                    std::size_t vocab_size) {
  if (eval.size() < 2) {
    throw std::invalid_argument("unigram_bits_per_char: stream needs at least 2 characters");
  }
  std::vector<double> counts(vocab_size, 1.0);
  for (CharId c : train) {
    if (c >= vocab_size) {
      throw std::invalid_argument("unigram_bits_per_char: index out of range");
    }
    counts[c] += 1.0;
  }
  const double total = static_cast<double>(train.size()) + static_cast<double>(vocab_size);
  double bits = 0;
  for (std::size_t t = 1; t < eval.size(); ++t) {
    if (eval[t] >= vocab_size) {
      throw std::invalid_argument("unigram_bits_per_char: index out of range");
    }
    bits -= std::log2(counts[eval[t]] / total);
  }
  return bits / static_cast<double>(eval.size() - 1);
}

}  // namespace morphoscope
