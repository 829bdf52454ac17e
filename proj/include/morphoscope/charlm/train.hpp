#pragma once

#include "morphoscope/charlm/eval.hpp"
#include "morphoscope/charlm/model.hpp"
#include "morphoscope/corpus/stream.hpp"
#include "morphoscope/errors.hpp"
#include "morphoscope/numerics/adam.hpp"

#include <array>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace morphoscope {

struct TrainConfig {
  std::size_t embed = 64;
  std::size_t hidden = 256;
  double lr = 0.003;
  std::size_t batch = 50;
  double dropout = 0.2;
  std::size_t bptt = 100;
  std::size_t epochs = 10;
  std::uint64_t seed = 1;
  double clip = 5.0;
  std::size_t patience = 2;
  double init_scale = 0.08;
  double forget_bias = 1.0;

  void validate() const {
    if (!(dropout >= 0.0 && dropout < 1.0)) {
      throw std::invalid_argument("TrainConfig: dropout must be in [0, 1)");
    }
    if (embed == 0 || hidden == 0 || batch == 0 || bptt == 0 || epochs == 0) {
      throw std::invalid_argument("TrainConfig: counts must be >= 1");
    }
    if (!(lr > 0.0) || !(clip > 0.0)) {
      throw std::invalid_argument("TrainConfig: lr and clip must be positive");
    }
  }
};

// Adam moments for each parameter array, in checkpoint order.
template <class T>
struct OptimizerState {
  std::array<AdamState<T>, 6> slots;

  static OptimizerState for_params(const ModelParams<T>& p) {
    OptimizerState s;
    auto arrays = p.arrays();
    for (std::size_t k = 0; k < 6; ++k) {
      s.slots[k] = AdamState<T>(arrays[k].size());
    }
    return s;
  }
};

struct EpochLog {
  std::size_t epoch = 0;
  double train_bpc = 0;
  double dev_bpc = 0;
  std::size_t updates = 0;
  std::size_t clipped = 0;
  double max_grad_norm = 0;
  double seconds = 0;  // wall clock; not part of any deterministic artifact
};

template <class T>
struct TrainResult {
  CharLM<T> best;
  OptimizerState<T> best_optimizer;
  std::size_t best_epoch = 0;
  double best_dev_bpc = std::numeric_limits<double>::infinity();
  std::vector<EpochLog> log;
  std::vector<double> loss_trace;  // per-update training loss (nats/char)
};

// Called after each epoch with the current (not necessarily best) model.
template <class T>
using EpochCallback = std::function<void(const EpochLog&, const CharLM<T>&, const OptimizerState<T>&)>;

template <class T>
TrainResult<T> train_lm(const TrainConfig& cfg, const StreamSplit& split, const Vocab& vocab,
                        const EpochCallback<T>& on_epoch = {}) {
  cfg.validate();
  if (split.dev.size() < 2) {
    throw std::invalid_argument("train: development stream needs at least 2 characters");
  }
  BatchIterator batches(split.train, cfg.batch, cfg.bptt);

  Rng init_rng(cfg.seed);
  CharLM<T> model(vocab, cfg.embed, cfg.hidden);
  model.init(init_rng, cfg.init_scale, cfg.forget_bias);
  Rng dropout_rng = init_rng.fork(1);

  auto opt = OptimizerState<T>::for_params(model.params());
  auto grad = ModelParams<T>::zeros(vocab.size(), cfg.embed, cfg.hidden);

  TrainResult<T> result;
  result.best = model;
  result.best_optimizer = opt;
  std::size_t since_best = 0;
  const auto B = static_cast<Eigen::Index>(cfg.batch);
  const auto n = static_cast<Eigen::Index>(cfg.hidden);
  const double keep = 1.0 - cfg.dropout;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    EpochLog log;
    log.epoch = epoch;
    batches.reset();
    Matrix<T> h = Matrix<T>::Zero(B, n);
    Matrix<T> c = Matrix<T>::Zero(B, n);
    double loss_sum = 0;
    Matrix<T> mask;
    while (auto block = batches.next()) {
      if (!block->carry) {
        h.setZero();
        c.setZero();
      }
      Segment seg{block->batch, block->bptt, block->inputs, block->targets};
      const Matrix<T>* mask_ptr = nullptr;
      if (cfg.dropout > 0) {
        mask.resize(static_cast<Eigen::Index>(cfg.bptt) * B, static_cast<Eigen::Index>(cfg.embed));
        for (Eigen::Index i = 0; i < mask.size(); ++i) {
          mask.data()[i] = dropout_rng.bernoulli(keep) ? static_cast<T>(1.0 / keep) : T(0);
        }
        mask_ptr = &mask;
      }
      grad.set_zero();
      const double loss = model.segment_loss(seg, h, c, &grad, mask_ptr);
      auto garrays = grad.arrays();
      const double norm = clip_global_norm<T>(std::span<const std::span<T>>(garrays), cfg.clip);
      if (!std::isfinite(loss) || !std::isfinite(norm)) {
        std::ostringstream msg;
        msg << "non-finite training loss at epoch " << epoch << ", block " << block->index
            << " (loss=" << loss << ", grad norm=" << norm << ", clipped updates so far=" << log.clipped
            << ", max grad norm=" << log.max_grad_norm << ")";
        throw TrainingDiverged(msg.str());
      }
      if (norm > cfg.clip) {
        ++log.clipped;
      }
      log.max_grad_norm = std::max(log.max_grad_norm, norm);
      auto parrays = model.params().arrays();
      for (std::size_t k = 0; k < 6; ++k) {
        adam_step<T>(parrays[k], garrays[k], opt.slots[k], cfg.lr);
      }
      loss_sum += loss;
      result.loss_trace.push_back(loss);
      ++log.updates;
    }
    log.train_bpc = loss_sum / static_cast<double>(std::max<std::size_t>(log.updates, 1)) / std::log(2.0);
    log.dev_bpc = bits_per_char(model, split.dev);
    log.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.log.push_back(log);
    if (on_epoch) {
      on_epoch(log, model, opt);
    }
    if (log.dev_bpc < result.best_dev_bpc) {
      result.best_dev_bpc = log.dev_bpc;
      result.best_epoch = epoch;
      result.best = model;
      result.best_optimizer = opt;
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      break;
    }
  }
  return result;
}

}  // namespace morphoscope
