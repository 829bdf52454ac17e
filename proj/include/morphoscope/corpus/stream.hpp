#pragma once

#include "morphoscope/corpus/vocab.hpp"
#include "morphoscope/numerics/rng.hpp"

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace morphoscope {

struct StreamSplit {
  std::vector<CharId> train;
  std::vector<CharId> dev;
  double fraction = 0.9;
  std::size_t dev_offset = 0;  // where the dev window was cut from the source stream
};

// Contiguous train/dev split: a single dev window of (1 - fraction) of the
// stream is cut at a seeded random offset; the remainder, joined, is train.
inline StreamSplit split_stream(std::span<const CharId> stream, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) {
    throw std::invalid_argument("split_stream: fraction must be in (0, 1)");
  }
  const std::size_t n = stream.size();
  const auto dev_len = static_cast<std::size_t>(std::llround((1.0 - fraction) * static_cast<double>(n)));
  if (dev_len == 0 || dev_len >= n) {
    throw std::invalid_argument("split_stream: stream of " + std::to_string(n) + " is too short to split");
  }
  Rng rng(seed);
  const std::size_t cut = static_cast<std::size_t>(rng.below(n - dev_len + 1));
  StreamSplit s;
  s.fraction = fraction;
  s.dev_offset = cut;
  s.dev.assign(stream.begin() + static_cast<std::ptrdiff_t>(cut),
               stream.begin() + static_cast<std::ptrdiff_t>(cut + dev_len));
  s.train.reserve(n - dev_len);
  s.train.insert(s.train.end(), stream.begin(), stream.begin() + static_cast<std::ptrdiff_t>(cut));
  s.train.insert(s.train.end(), stream.begin() + static_cast<std::ptrdiff_t>(cut + dev_len), stream.end());
  return s;
}

// One truncated-BPTT block: `batch` lanes by `bptt` steps, row-major.
struct Block {
  std::size_t batch = 0;
  std::size_t bptt = 0;
  std::size_t index = 0;
  bool carry = false;  // false on the first block: lanes start from a fresh state
  std::vector<CharId> inputs;
  std::vector<CharId> targets;

  CharId input(std::size_t lane, std::size_t t) const { return inputs[lane * bptt + t]; }
  CharId target(std::size_t lane, std::size_t t) const { return targets[lane * bptt + t]; }
};

// Splits a stream into `batch` contiguous lanes and walks them in lockstep,
// `bptt` characters at a time. Single consumer; the stream must outlive it.
class BatchIterator {
 public:
  BatchIterator(std::span<const CharId> stream, std::size_t batch, std::size_t bptt)
      : stream_(stream), batch_(batch), bptt_(bptt) {
    if (batch == 0 || bptt == 0) {
      throw std::invalid_argument("stream_batches: batch and bptt must be positive");
    }
    if (stream.size() < batch * (bptt + 1)) {
      throw std::invalid_argument("stream_batches: stream of " + std::to_string(stream.size()) +
                                  " chars is shorter than batch*(bptt+1) = " +
                                  std::to_string(batch * (bptt + 1)));
    }
    lane_len_ = stream.size() / batch;
    blocks_ = (lane_len_ - 1) / bptt;
  }

  std::size_t num_blocks() const noexcept { return blocks_; }
  std::size_t lane_length() const noexcept { return lane_len_; }
  std::size_t lane_offset(std::size_t lane) const noexcept { return lane * lane_len_; }

  std::optional<Block> next() {
    if (cursor_ >= blocks_) {
      return std::nullopt;
    }
    Block b;
    b.batch = batch_;
    b.bptt = bptt_;
    b.index = cursor_;
    b.carry = cursor_ > 0;
    b.inputs.resize(batch_ * bptt_);
    b.targets.resize(batch_ * bptt_);
    for (std::size_t lane = 0; lane < batch_; ++lane) {
      const std::size_t base = lane_offset(lane) + cursor_ * bptt_;
      for (std::size_t t = 0; t < bptt_; ++t) {
        b.inputs[lane * bptt_ + t] = stream_[base + t];
        b.targets[lane * bptt_ + t] = stream_[base + t + 1];
      }
    }
    ++cursor_;
    return b;
  }

  void reset() noexcept { cursor_ = 0; }

 private:
  std::span<const CharId> stream_;
  std::size_t batch_;
  std::size_t bptt_;
  std::size_t lane_len_ = 0;
  std::size_t blocks_ = 0;
  std::size_t cursor_ = 0;
};

inline BatchIterator stream_batches(std::span<const CharId> stream, std::size_t batch, std::size_t bptt) {
  return BatchIterator(stream, batch, bptt);
}

}  // namespace morphoscope
