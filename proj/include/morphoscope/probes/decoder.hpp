#pragma once

// Sequence-labelling decoder that reads frozen LM encoder states:
//
//   h_dec_t = LSTM_dec(h_enc_t; h_dec_{t-1})
//   p(label_t) = softmax(W_o h_dec_t + b_o)
//
// Encoder states are computed once and cached; only the decoder is trained.

#include "morphoscope/charlm/lstm.hpp"
#include "morphoscope/errors.hpp"
#include "morphoscope/numerics/adam.hpp"
#include "morphoscope/numerics/linalg.hpp"
#include "morphoscope/numerics/rng.hpp"

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace morphoscope {

using LabelId = std::uint32_t;

class LabelVocab {
 public:
  LabelVocab() = default;
  explicit LabelVocab(std::vector<std::string> labels) : labels_(std::move(labels)) {
    if (labels_.empty()) {
      throw std::invalid_argument("LabelVocab: no labels");
    }
    for (std::size_t i = 0; i < labels_.size(); ++i) {
      if (!index_.emplace(labels_[i], static_cast<LabelId>(i)).second) {
        throw std::invalid_argument("LabelVocab: duplicate label '" + labels_[i] + "'");
      }
    }
  }

  std::size_t size() const noexcept { return labels_.size(); }
  const std::vector<std::string>& labels() const noexcept { return labels_; }
  const std::string& label(LabelId id) const { return labels_.at(id); }

  LabelId id(const std::string& label) const {
    auto it = index_.find(label);
    if (it == index_.end()) {
      throw std::invalid_argument("label '" + label + "' is not in the label vocabulary");
    }
    return it->second;
  }

  bool operator==(const LabelVocab& o) const { return labels_ == o.labels_; }

 private:
  std::vector<std::string> labels_;
  std::map<std::string, LabelId> index_;
};

template <class T>
struct ProbeDecoder {
  LabelVocab labels;
  LstmWeights<T> lstm;  // input n_enc -> hidden m
  Matrix<T> Wo;         // |labels| x m
  Vector<T> bo;         // |labels|

  static ProbeDecoder zeros(LabelVocab labels, std::size_t encoder_dim, std::size_t hidden) {
    if (encoder_dim == 0 || hidden == 0) {
      throw std::invalid_argument("ProbeDecoder: dimensions must be positive");
    }
    ProbeDecoder d;
    const auto L = static_cast<Eigen::Index>(labels.size());
    d.labels = std::move(labels);
    d.lstm = LstmWeights<T>(encoder_dim, hidden);
    d.Wo = Matrix<T>::Zero(L, static_cast<Eigen::Index>(hidden));
    d.bo = Vector<T>::Zero(L);
    return d;
  }

  void init(Rng& rng, double scale = 0.08, double forget_bias = 1.0) {
    lstm.init_uniform(rng, scale, forget_bias);
    for (Eigen::Index i = 0; i < Wo.size(); ++i) {
      Wo.data()[i] = static_cast<T>(rng.uniform(-scale, scale));
    }
    bo.setZero();
  }

  std::size_t encoder_dim() const { return lstm.input_dim(); }
  std::size_t hidden_dim() const { return lstm.hidden_dim(); }
  std::size_t num_labels() const { return labels.size(); }

  // Checkpoint order: W_x, W_h, b, W_o, b_o.
  std::array<std::span<T>, 5> arrays() { return {as_span(lstm.Wx), as_span(lstm.Wh), as_span(lstm.b), as_span(Wo), as_span(bo)}; }
  std::array<std::span<const T>, 5> arrays() const {
    return {as_span(lstm.Wx), as_span(lstm.Wh), as_span(lstm.b), as_span(Wo), as_span(bo)};
  }

  void set_zero() {
    lstm.set_zero();
    Wo.setZero();
    bo.setZero();
  }

  template <class U>
  ProbeDecoder<U> cast() const {
    ProbeDecoder<U> out;
    out.labels = labels;
    out.lstm = lstm.template cast<U>();
    out.Wo = Wo.template cast<U>();
    out.bo = bo.template cast<U>();
    return out;
  }
};

// Encoder states for one sequence (rows = positions) and their gold labels.
template <class T>
struct ProbeSequence {
  Matrix<T> states;
  std::vector<LabelId> labels;
};

// Label distributions (rows = positions) for one sequence, decoder state
// starting from zero.
template <class T>
Matrix<T> decoder_probs(const ProbeDecoder<T>& dec, const Matrix<T>& states) {
  const auto m = static_cast<Eigen::Index>(dec.hidden_dim());
  if (states.rows() == 0) {
    return Matrix<T>(0, static_cast<Eigen::Index>(dec.num_labels()));
  }
  if (static_cast<std::size_t>(states.cols()) != dec.encoder_dim()) {
    throw std::invalid_argument("decoder_probs: encoder states have " + std::to_string(states.cols()) +
                                " columns, decoder expects " + std::to_string(dec.encoder_dim()));
  }
  const Matrix<T> zero = Matrix<T>::Zero(1, m);
  const auto res = lstm_forward(dec.lstm, states, 1, zero, zero);
  Matrix<T> probs = res.hs * dec.Wo.transpose();
  probs.rowwise() += dec.bo.transpose();
  softmax_rows_inplace(probs);
  return probs;
}

inline std::vector<LabelId> argmax_rows(const auto& probs) {
  std::vector<LabelId> out(static_cast<std::size_t>(probs.rows()));
  for (Eigen::Index r = 0; r < probs.rows(); ++r) {
    Eigen::Index best = 0;
    probs.row(r).maxCoeff(&best);
    out[static_cast<std::size_t>(r)] = static_cast<LabelId>(best);
  }
  return out;
}

// Mean cross-entropy over all real (unpadded) positions of a batch of
// sequences; gradients are accumulated into `grad` when given. Sequences are
// right-padded with zero inputs; padding cannot influence earlier positions
// and carries zero loss weight.
template <class T>
double decoder_batch_loss(const ProbeDecoder<T>& dec, std::span<const ProbeSequence<T>* const> batch,
                          ProbeDecoder<T>* grad) {
  const auto B = static_cast<Eigen::Index>(batch.size());
  const auto m = static_cast<Eigen::Index>(dec.hidden_dim());
  const auto in = static_cast<Eigen::Index>(dec.encoder_dim());
  const auto L = dec.num_labels();
  Eigen::Index steps = 0;
  std::size_t count = 0;
  for (const auto* s : batch) {
    if (static_cast<std::size_t>(s->states.rows()) != s->labels.size()) {
      throw std::invalid_argument("decoder_batch_loss: states and labels differ in length");
    }
    if (s->states.rows() > 0 && s->states.cols() != in) {
      throw std::invalid_argument("decoder_batch_loss: encoder dimension mismatch");
    }
    for (LabelId l : s->labels) {
      if (l >= L) {
        throw std::invalid_argument("decoder_batch_loss: label " + std::to_string(l) + " outside the label vocabulary");
      }
    }
    steps = std::max(steps, s->states.rows());
    count += s->labels.size();
  }
  if (count == 0) {
    return 0.0;
  }
  Matrix<T> xs = Matrix<T>::Zero(steps * B, in);
  for (Eigen::Index k = 0; k < B; ++k) {
    const auto& st = batch[static_cast<std::size_t>(k)]->states;
    for (Eigen::Index t = 0; t < st.rows(); ++t) {
      xs.row(t * B + k) = st.row(t);
    }
  }
  const Matrix<T> zero = Matrix<T>::Zero(B, m);
  LstmTape<T> tape;
  const auto res = lstm_forward(dec.lstm, xs, batch.size(), zero, zero, grad ? &tape : nullptr);
  Matrix<T> probs = res.hs * dec.Wo.transpose();
  probs.rowwise() += dec.bo.transpose();
  softmax_rows_inplace(probs);

  double loss = 0;
  for (Eigen::Index k = 0; k < B; ++k) {
    const auto& labels = batch[static_cast<std::size_t>(k)]->labels;
    for (std::size_t t = 0; t < labels.size(); ++t) {
      loss -= std::log(std::max(static_cast<double>(probs(static_cast<Eigen::Index>(t) * B + k, labels[t])), 1e-12));
    }
  }
  loss /= static_cast<double>(count);

  if (grad) {
    Matrix<T>& dlogits = probs;
    for (Eigen::Index k = 0; k < B; ++k) {
      const auto& labels = batch[static_cast<std::size_t>(k)]->labels;
      for (Eigen::Index t = 0; t < steps; ++t) {
        if (static_cast<std::size_t>(t) < labels.size()) {
          dlogits(t * B + k, labels[static_cast<std::size_t>(t)]) -= T(1);
        } else {
          dlogits.row(t * B + k).setZero();
        }
      }
    }
    dlogits /= static_cast<T>(count);
    grad->Wo.noalias() += dlogits.transpose() * res.hs;
    grad->bo += dlogits.colwise().sum().transpose();
    const Matrix<T> dhs = dlogits * dec.Wo;
    lstm_backward(dec.lstm, tape, res.hs, dhs, grad->lstm, nullptr);
  }
  return loss;
}

struct ProbeTrainConfig {
  std::size_t hidden = 256;
  std::size_t epochs = 5;
  double lr = 0.003;
  std::size_t batch = 32;
  double clip = 5.0;
  std::uint64_t seed = 1;
  double init_scale = 0.08;

  void validate() const {
    if (hidden == 0 || epochs == 0 || batch == 0) {
      throw std::invalid_argument("ProbeTrainConfig: counts must be >= 1");
    }
    if (!(lr > 0) || !(clip > 0)) {
      throw std::invalid_argument("ProbeTrainConfig: lr and clip must be positive");
    }
  }
};

template <class T>
struct ProbeTrainResult {
  ProbeDecoder<T> decoder;
  std::vector<double> epoch_loss;  // mean per-position training loss (nats)
};

// Adam on the decoder only; the encoder states are inputs.
template <class T>
ProbeTrainResult<T> train_probe(const LabelVocab& labels, const std::vector<ProbeSequence<T>>& data,
                                const ProbeTrainConfig& cfg) {
  cfg.validate();
  if (data.empty()) {
    throw std::invalid_argument("train_probe: empty training set");
  }
  std::size_t encoder_dim = 0;
  for (const auto& s : data) {
    if (s.states.rows() > 0) {
      encoder_dim = static_cast<std::size_t>(s.states.cols());
      break;
    }
  }
  if (encoder_dim == 0) {
    throw std::invalid_argument("train_probe: all training sequences are empty");
  }
  Rng rng(cfg.seed);
  ProbeTrainResult<T> result;
  result.decoder = ProbeDecoder<T>::zeros(labels, encoder_dim, cfg.hidden);
  result.decoder.init(rng, cfg.init_scale);
  Rng order_rng = rng.fork(2);

  auto grad = ProbeDecoder<T>::zeros(labels, encoder_dim, cfg.hidden);
  std::array<AdamState<T>, 5> opt;
  {
    auto arrays = result.decoder.arrays();
    for (std::size_t k = 0; k < 5; ++k) {
      opt[k] = AdamState<T>(arrays[k].size());
    }
  }
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<const ProbeSequence<T>*> batch;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    order_rng.shuffle(order.begin(), order.end());
    double total = 0;
    std::size_t positions = 0;
    for (std::size_t first = 0; first < order.size(); first += cfg.batch) {
      batch.clear();
      std::size_t n_pos = 0;
      for (std::size_t i = first; i < std::min(order.size(), first + cfg.batch); ++i) {
        batch.push_back(&data[order[i]]);
        n_pos += data[order[i]].labels.size();
      }
      if (n_pos == 0) {
        continue;
      }
      grad.set_zero();
      const double loss = decoder_batch_loss<T>(result.decoder, batch, &grad);
      auto g = grad.arrays();
      const double norm = clip_global_norm<T>(std::span<const std::span<T>>(g), cfg.clip);
      if (!std::isfinite(loss) || !std::isfinite(norm)) {
        throw TrainingDiverged("probe training: non-finite loss at epoch " + std::to_string(epoch + 1));
      }
      auto p = result.decoder.arrays();
      for (std::size_t k = 0; k < 5; ++k) {
        adam_step<T>(p[k], g[k], opt[k], cfg.lr);
      }
      total += loss * static_cast<double>(n_pos);
      positions += n_pos;
    }
    result.epoch_loss.push_back(total / static_cast<double>(std::max<std::size_t>(positions, 1)));
  }
  return result;
}

}  // namespace morphoscope
