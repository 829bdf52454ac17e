#pragma once

// Frozen-encoder feature extraction: LM hidden states over the characters of
// interest, read with their left context.

#include "morphoscope/charlm/model.hpp"
#include "morphoscope/corpus/contexts.hpp"

#include <algorithm>
#include <numeric>
#include <string>
#include <thread>
#include <vector>

namespace morphoscope {

// The character sequence the encoder reads for a word in context:
// context + ' ' + word, or just the word when the context is empty.
inline std::u32string contexted_text(const ContextedWord& cw) {
  if (cw.context.empty()) {
    return cw.word;
  }
  return cw.context + U' ' + cw.word;
}

// Hidden states at each character of the target word (rows = word chars).
template <class T>
Matrix<T> encode_contexted(const CharLM<T>& model, const ContextedWord& cw) {
  const auto ids = model.vocab().encode(contexted_text(cw));
  auto state = model.zero_state();
  const std::size_t skip = ids.size() - cw.word.size();
  Matrix<T> out(static_cast<Eigen::Index>(cw.word.size()), static_cast<Eigen::Index>(model.hidden_dim()));
  for (std::size_t t = 0; t < ids.size(); ++t) {
    model.step(ids[t], state);
    if (t >= skip) {
      out.row(static_cast<Eigen::Index>(t - skip)) = state.h.transpose();
    }
  }
  return out;
}

// Hidden states for the last `keep[i]` characters of each sequence, computed
// in length-sorted padded batches. With threads > 1, batches are distributed
// over workers; each batch is computed identically regardless of the worker,
// so results do not depend on the thread count.
template <class T>
std::vector<Matrix<T>> encode_suffix_states(const CharLM<T>& model, const std::vector<std::vector<CharId>>& seqs,
                                            const std::vector<std::size_t>& keep, std::size_t batch = 64,
                                            std::size_t threads = 1) {
  if (keep.size() != seqs.size()) {
    throw std::invalid_argument("encode_suffix_states: keep/seqs size mismatch");
  }
  std::vector<std::size_t> order(seqs.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return seqs[a].size() < seqs[b].size(); });
  std::vector<Matrix<T>> out(seqs.size());
  const std::size_t n_batches = (seqs.size() + batch - 1) / batch;
  auto run = [&](std::size_t b) {
    const std::size_t first = b * batch;
    const std::size_t last = std::min(seqs.size(), first + batch);
    std::vector<std::vector<CharId>> chunk;
    for (std::size_t i = first; i < last; ++i) {
      chunk.push_back(seqs[order[i]]);
    }
    auto hs = model.hidden_states(chunk, chunk.size());
    for (std::size_t i = first; i < last; ++i) {
      const std::size_t idx = order[i];
      const auto k = static_cast<Eigen::Index>(std::min(keep[idx], seqs[idx].size()));
      out[idx] = hs[i - first].bottomRows(k);
    }
  };
  threads = std::max<std::size_t>(1, std::min(threads, n_batches));
  if (threads == 1) {
    for (std::size_t b = 0; b < n_batches; ++b) {
      run(b);
    }
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < threads; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t b = w; b < n_batches; b += threads) {
          run(b);
        }
      });
    }
    for (auto& th : pool) {
      th.join();
    }
  }
  return out;
}

template <class T>
std::vector<Matrix<T>> encode_contexted_batch(const CharLM<T>& model, const std::vector<ContextedWord>& words,
                                              std::size_t batch = 64, std::size_t threads = 1) {
  std::vector<std::vector<CharId>> seqs;
  std::vector<std::size_t> keep;
  seqs.reserve(words.size());
  for (const auto& cw : words) {
    seqs.push_back(model.vocab().encode(contexted_text(cw)));
    keep.push_back(cw.word.size());
  }
  return encode_suffix_states(model, seqs, keep, batch, threads);
}

// Sentence-level encoding: a priming space, then the sentence; rows are the
// sentence characters.
template <class T>
std::vector<Matrix<T>> encode_sentences(const CharLM<T>& model, const std::vector<std::u32string>& sentences,
                                        std::size_t batch = 32, std::size_t threads = 1) {
  std::vector<std::vector<CharId>> seqs;
  std::vector<std::size_t> keep;
  for (const auto& s : sentences) {
    seqs.push_back(model.vocab().encode(U" " + s));
    keep.push_back(s.size());
  }
  return encode_suffix_states(model, seqs, keep, batch, threads);
}

}  // namespace morphoscope
