#pragma once

#include "morphoscope/charlm/lstm.hpp"
#include "morphoscope/corpus/vocab.hpp"
#include "morphoscope/numerics/linalg.hpp"
#include "morphoscope/numerics/rng.hpp"

#include <array>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace morphoscope {

// Embedding -> LSTM -> linear -> softmax.
template <class T>
struct ModelParams {
  Matrix<T> E;   // |V| x d
  LstmWeights<T> lstm;
  Matrix<T> Wo;  // |V| x n
  Vector<T> bo;  // |V|

  static ModelParams zeros(std::size_t vocab, std::size_t embed, std::size_t hidden) {
    ModelParams p;
    p.E = Matrix<T>::Zero(vocab, embed);
    p.lstm = LstmWeights<T>(embed, hidden);
    p.Wo = Matrix<T>::Zero(vocab, hidden);
    p.bo = Vector<T>::Zero(vocab);
    return p;
  }

  std::size_t vocab_size() const { return static_cast<std::size_t>(E.rows()); }
  std::size_t embed_dim() const { return static_cast<std::size_t>(E.cols()); }
  std::size_t hidden_dim() const { return lstm.hidden_dim(); }

  // Flat views in checkpoint order: E, W_x, W_h, b, W_o, b_o.
  std::array<std::span<T>, 6> arrays() {
    return {as_span(E), as_span(lstm.Wx), as_span(lstm.Wh), as_span(lstm.b), as_span(Wo), as_span(bo)};
  }
  std::array<std::span<const T>, 6> arrays() const {
    return {as_span(E), as_span(lstm.Wx), as_span(lstm.Wh), as_span(lstm.b), as_span(Wo), as_span(bo)};
  }

  static constexpr std::array<const char*, 6> kNames = {"E", "W_x", "W_h", "b", "W_o", "b_o"};

  void set_zero() {
    E.setZero();
    lstm.set_zero();
    Wo.setZero();
    bo.setZero();
  }

  template <class U>
  ModelParams<U> cast() const {
    ModelParams<U> out;
    out.E = E.template cast<U>();
    out.lstm = lstm.template cast<U>();
    out.Wo = Wo.template cast<U>();
    out.bo = bo.template cast<U>();
    return out;
  }
};

template <class T>
struct ForwardResult {
  Matrix<T> probs;  // one row per input position: p(next char | prefix)
  LstmState<T> state;
};

// Truncated-BPTT segment: `batch` lanes x `steps` characters, lane-major.
struct Segment {
  std::size_t batch = 0;
  std::size_t steps = 0;
  std::span<const CharId> inputs;
  std::span<const CharId> targets;
};

template <class T>
class CharLM {
 public:
  CharLM() = default;
  CharLM(Vocab vocab, std::size_t embed, std::size_t hidden)
      : vocab_(std::move(vocab)), params_(ModelParams<T>::zeros(vocab_.size(), embed, hidden)) {
    if (embed == 0 || hidden == 0) {
      throw std::invalid_argument("CharLM: dimensions must be positive");
    }
  }
  CharLM(Vocab vocab, ModelParams<T> params) : vocab_(std::move(vocab)), params_(std::move(params)) {
    if (params_.vocab_size() != vocab_.size() || params_.Wo.rows() != params_.E.rows() ||
        params_.bo.size() != params_.E.rows() || params_.lstm.input_dim() != params_.embed_dim() ||
        static_cast<std::size_t>(params_.Wo.cols()) != params_.hidden_dim()) {
      throw std::invalid_argument("CharLM: parameter shapes inconsistent with vocabulary");
    }
  }

  const Vocab& vocab() const noexcept { return vocab_; }
  ModelParams<T>& params() noexcept { return params_; }
  const ModelParams<T>& params() const noexcept { return params_; }
  std::size_t vocab_size() const { return vocab_.size(); }
  std::size_t embed_dim() const { return params_.embed_dim(); }
  std::size_t hidden_dim() const { return params_.hidden_dim(); }

  // Uniform(-scale, scale) weights, zero biases, forget-gate bias `forget_bias`.
  void init(Rng& rng, double scale = 0.08, double forget_bias = 1.0) {
    for (Eigen::Index i = 0; i < params_.E.size(); ++i) {
      params_.E.data()[i] = static_cast<T>(rng.uniform(-scale, scale));
    }
    params_.lstm.init_uniform(rng, scale, forget_bias);
    for (Eigen::Index i = 0; i < params_.Wo.size(); ++i) {
      params_.Wo.data()[i] = static_cast<T>(rng.uniform(-scale, scale));
    }
    params_.bo.setZero();
  }

  LstmState<T> zero_state() const { return LstmState<T>::zeros(hidden_dim()); }

  void check_id(CharId id) const {
    if (id >= vocab_size()) {
      throw std::invalid_argument("CharLM: character index " + std::to_string(id) + " out of range for |V| = " +
                                  std::to_string(vocab_size()));
    }
  }

  // Consumes one character.
  void step(CharId id, LstmState<T>& state) const {
    check_id(id);
    const Vector<T> x = params_.E.row(id).transpose();
    state = lstm_cell(x, state, params_.lstm);
  }

  void consume(std::span<const CharId> ids, LstmState<T>& state) const {
    for (CharId id : ids) {
      step(id, state);
    }
  }

  Vector<T> logits(const LstmState<T>& state) const { return params_.Wo * state.h + params_.bo; }

  // p(next char | state).
  Vector<T> next_distribution(const LstmState<T>& state) const {
    Vector<T> z = logits(state);
    Matrix<T> row = z.transpose();
    softmax_rows_inplace(row);
    return row.transpose();
  }

  ForwardResult<T> forward(std::span<const CharId> ids, LstmState<T> state) const {
    ForwardResult<T> out;
    out.probs.resize(static_cast<Eigen::Index>(ids.size()), static_cast<Eigen::Index>(vocab_size()));
    for (std::size_t t = 0; t < ids.size(); ++t) {
      step(ids[t], state);
      out.probs.row(static_cast<Eigen::Index>(t)) = next_distribution(state).transpose();
    }
    out.state = std::move(state);
    return out;
  }

  // Hidden states h_t after each character of each sequence, every sequence
  // starting from the zero state. Sequences are processed in padded batches.
  std::vector<Matrix<T>> hidden_states(const std::vector<std::vector<CharId>>& seqs,
                                       std::size_t batch = 32) const {
    std::vector<Matrix<T>> out(seqs.size());
    const auto n = static_cast<Eigen::Index>(hidden_dim());
    for (std::size_t first = 0; first < seqs.size(); first += batch) {
      const std::size_t count = std::min(batch, seqs.size() - first);
      std::size_t steps = 0;
      for (std::size_t k = 0; k < count; ++k) {
        steps = std::max(steps, seqs[first + k].size());
      }
      if (steps == 0) {
        for (std::size_t k = 0; k < count; ++k) {
          out[first + k].resize(0, n);
        }
        continue;
      }
      const auto B = static_cast<Eigen::Index>(count);
      Matrix<T> xs(static_cast<Eigen::Index>(steps) * B, static_cast<Eigen::Index>(embed_dim()));
      for (std::size_t t = 0; t < steps; ++t) {
        for (std::size_t k = 0; k < count; ++k) {
          const auto& s = seqs[first + k];
          const CharId id = t < s.size() ? s[t] : Vocab::kUnk;
          check_id(id);
          xs.row(static_cast<Eigen::Index>(t) * B + static_cast<Eigen::Index>(k)) = params_.E.row(id);
        }
      }
      const Matrix<T> zero = Matrix<T>::Zero(B, n);
      auto res = lstm_forward(params_.lstm, xs, count, zero, zero, nullptr);
      for (std::size_t k = 0; k < count; ++k) {
        const auto len = static_cast<Eigen::Index>(seqs[first + k].size());
        Matrix<T>& dst = out[first + k];
        dst.resize(len, n);
        for (Eigen::Index t = 0; t < len; ++t) {
          dst.row(t) = res.hs.row(t * B + static_cast<Eigen::Index>(k));
        }
      }
    }
    return out;
  }

  // Mean cross-entropy (nats per character) of a segment, with optional
  // gradient accumulation. `h0`/`c0` are batch x n carried states and are
  // replaced by the final states. `dropout_mask`, if non-empty, multiplies the
  // embedded inputs ((steps*batch) x d, time-major rows).
  double segment_loss(const Segment& seg, Matrix<T>& h0, Matrix<T>& c0, ModelParams<T>* grad,
                      const Matrix<T>* dropout_mask = nullptr) const {
    const auto B = static_cast<Eigen::Index>(seg.batch);
    const auto S = static_cast<Eigen::Index>(seg.steps);
    const auto d = static_cast<Eigen::Index>(embed_dim());
    if (seg.inputs.size() != seg.batch * seg.steps || seg.targets.size() != seg.inputs.size()) {
      throw std::invalid_argument("segment_loss: segment arrays do not match batch x steps");
    }
    Matrix<T> xs(S * B, d);
    for (Eigen::Index t = 0; t < S; ++t) {
      for (Eigen::Index lane = 0; lane < B; ++lane) {
        const CharId id = seg.inputs[static_cast<std::size_t>(lane * S + t)];
        check_id(id);
        check_id(seg.targets[static_cast<std::size_t>(lane * S + t)]);
        xs.row(t * B + lane) = params_.E.row(id);
      }
    }
    if (dropout_mask) {
      xs.array() *= dropout_mask->array();
    }
    LstmTape<T> tape;
    auto res = lstm_forward(params_.lstm, xs, seg.batch, h0, c0, grad ? &tape : nullptr);
    Matrix<T> probs = res.hs * params_.Wo.transpose();
    probs.rowwise() += params_.bo.transpose();
    softmax_rows_inplace(probs);

    double loss = 0;
    const double count = static_cast<double>(S * B);
    for (Eigen::Index t = 0; t < S; ++t) {
      for (Eigen::Index lane = 0; lane < B; ++lane) {
        const CharId target = seg.targets[static_cast<std::size_t>(lane * S + t)];
        loss -= std::log(std::max(static_cast<double>(probs(t * B + lane, target)), 1e-12));
      }
    }
    loss /= count;

    if (grad) {
      // dL/dlogits = (p - onehot) / count
      Matrix<T>& dlogits = probs;
      for (Eigen::Index t = 0; t < S; ++t) {
        for (Eigen::Index lane = 0; lane < B; ++lane) {
          dlogits(t * B + lane, seg.targets[static_cast<std::size_t>(lane * S + t)]) -= T(1);
        }
      }
      dlogits /= static_cast<T>(count);
      grad->Wo.noalias() += dlogits.transpose() * res.hs;
      grad->bo += dlogits.colwise().sum().transpose();
      const Matrix<T> dhs = dlogits * params_.Wo;
      Matrix<T> dxs;
      lstm_backward(params_.lstm, tape, res.hs, dhs, grad->lstm, &dxs);
      if (dropout_mask) {
        dxs.array() *= dropout_mask->array();
      }
      for (Eigen::Index t = 0; t < S; ++t) {
        for (Eigen::Index lane = 0; lane < B; ++lane) {
          const CharId id = seg.inputs[static_cast<std::size_t>(lane * S + t)];
          grad->E.row(id) += dxs.row(t * B + lane);
        }
      }
    }
    h0 = res.h_last;
    c0 = res.c_last;
    return loss;
  }

  template <class U>
  CharLM<U> cast() const {
    return CharLM<U>(vocab_, params_.template cast<U>());
  }

 private:
  Vocab vocab_;
  ModelParams<T> params_;
};

}  // namespace morphoscope
