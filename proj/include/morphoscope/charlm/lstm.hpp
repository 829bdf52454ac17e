#pragma once

// Single-layer LSTM shared by the language model (encoder) and the probe
// decoders. Gate blocks are stacked in the order (i, f, g, o):
//
//   a = Wx x + Wh h + b
//   i = sigmoid(a_i)  f = sigmoid(a_f)  g = tanh(a_g)  o = sigmoid(a_o)
//   c' = f * c + i * g
//   h' = o * tanh(c')

#include "morphoscope/numerics/linalg.hpp"
#include "morphoscope/numerics/rng.hpp"

#include <array>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

namespace morphoscope {

template <class T>
struct LstmWeights {
  Matrix<T> Wx;  // 4n x input
  Matrix<T> Wh;  // 4n x n
  Vector<T> b;   // 4n

  LstmWeights() = default;
  LstmWeights(std::size_t input, std::size_t hidden)
      : Wx(Matrix<T>::Zero(4 * hidden, input)),
        Wh(Matrix<T>::Zero(4 * hidden, hidden)),
        b(Vector<T>::Zero(4 * hidden)) {}

  std::size_t input_dim() const { return static_cast<std::size_t>(Wx.cols()); }
  std::size_t hidden_dim() const { return static_cast<std::size_t>(Wh.cols()); }

  void set_zero() {
    Wx.setZero();
    Wh.setZero();
    b.setZero();
  }

  void init_uniform(Rng& rng, double scale, double forget_bias) {
    for (auto* m : {&Wx, &Wh}) {
      for (Eigen::Index i = 0; i < m->size(); ++i) {
        m->data()[i] = static_cast<T>(rng.uniform(-scale, scale));
      }
    }
    b.setZero();
    const auto n = static_cast<Eigen::Index>(hidden_dim());
    b.segment(n, n).setConstant(static_cast<T>(forget_bias));
  }

  template <class U>
  LstmWeights<U> cast() const {
    LstmWeights<U> out;
    out.Wx = Wx.template cast<U>();
    out.Wh = Wh.template cast<U>();
    out.b = b.template cast<U>();
    return out;
  }
};

template <class T>
struct LstmState {
  Vector<T> h;
  Vector<T> c;

  static LstmState zeros(std::size_t n) { return {Vector<T>::Zero(n), Vector<T>::Zero(n)}; }
};

// One unbatched step.
template <class T>
LstmState<T> lstm_cell(const std::type_identity_t<Vector<T>>& x, const LstmState<T>& state,
                       const LstmWeights<T>& w) {
  const auto n = static_cast<Eigen::Index>(w.hidden_dim());
  if (x.size() != w.Wx.cols() || state.h.size() != n || state.c.size() != n) {
    throw std::invalid_argument("lstm_cell: input " + std::to_string(x.size()) + ", state " +
                                std::to_string(state.h.size()) + "/" + std::to_string(state.c.size()) +
                                " do not match weights " + detail::shape_str(w.Wx.rows(), w.Wx.cols()));
  }
  Vector<T> a = w.Wx * x + w.Wh * state.h + w.b;
  LstmState<T> out;
  out.c.resize(n);
  out.h.resize(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const T i = sigmoid(a[k]);
    const T f = sigmoid(a[n + k]);
    const T g = std::tanh(a[2 * n + k]);
    const T o = sigmoid(a[3 * n + k]);
    out.c[k] = f * state.c[k] + i * g;
    out.h[k] = o * std::tanh(out.c[k]);
  }
  return out;
}

// Activations kept by the batched forward pass for the backward pass.
// Rows are time-major: row t*batch + lane.
template <class T>
struct LstmTape {
  std::size_t steps = 0;
  std::size_t batch = 0;
  Matrix<T> xs;                  // inputs, (steps*batch) x input
  Matrix<T> gates;               // activated gates, (steps*batch) x 4n
  Matrix<T> cs;                  // cell states, (steps*batch) x n
  Matrix<T> tanh_cs;             // tanh(c), (steps*batch) x n
  Matrix<T> h0, c0;              // batch x n
};

template <class T>
struct LstmBatchOutput {
  Matrix<T> hs;   // (steps*batch) x n
  Matrix<T> h_last, c_last;  // batch x n
};

// Runs `steps` time steps for `batch` independent lanes.
template <class T>
LstmBatchOutput<T> lstm_forward(const LstmWeights<T>& w, const Matrix<T>& xs, std::size_t batch,
                                const Matrix<T>& h0, const Matrix<T>& c0,
                                std::type_identity_t<LstmTape<T>>* tape = nullptr) {
  const auto n = static_cast<Eigen::Index>(w.hidden_dim());
  const auto B = static_cast<Eigen::Index>(batch);
  if (batch == 0 || xs.rows() % B != 0 || xs.cols() != w.Wx.cols()) {
    throw std::invalid_argument("lstm_forward: input block " + detail::shape_str(xs.rows(), xs.cols()) +
                                " does not fit batch " + std::to_string(batch) + " and weights " +
                                detail::shape_str(w.Wx.rows(), w.Wx.cols()));
  }
  if (h0.rows() != B || h0.cols() != n || c0.rows() != B || c0.cols() != n) {
    throw std::invalid_argument("lstm_forward: initial state shape mismatch");
  }
  const Eigen::Index steps = xs.rows() / B;

  Matrix<T> pre = xs * w.Wx.transpose();
  pre.rowwise() += w.b.transpose();

  LstmBatchOutput<T> out;
  out.hs.resize(steps * B, n);
  Matrix<T> gates_local, cs_local, tanh_local;
  Matrix<T>& gates = tape ? tape->gates : gates_local;
  Matrix<T>& cs = tape ? tape->cs : cs_local;
  Matrix<T>& tanh_cs = tape ? tape->tanh_cs : tanh_local;
  gates.resize(steps * B, 4 * n);
  cs.resize(steps * B, n);
  tanh_cs.resize(steps * B, n);

  Matrix<T> h = h0;
  Matrix<T> c = c0;
  Matrix<T> a(B, 4 * n);
  for (Eigen::Index t = 0; t < steps; ++t) {
    a.noalias() = h * w.Wh.transpose();
    a += pre.middleRows(t * B, B);
    for (Eigen::Index r = 0; r < B; ++r) {
      T* ar = a.row(r).data();
      for (Eigen::Index k = 0; k < n; ++k) {
        ar[k] = sigmoid(ar[k]);
        ar[n + k] = sigmoid(ar[n + k]);
        ar[2 * n + k] = std::tanh(ar[2 * n + k]);
        ar[3 * n + k] = sigmoid(ar[3 * n + k]);
      }
    }
    auto ig = a.leftCols(n).array();
    auto fg = a.middleCols(n, n).array();
    auto gg = a.middleCols(2 * n, n).array();
    auto og = a.rightCols(n).array();
    c = (fg * c.array() + ig * gg).matrix();
    Matrix<T> tc = c.array().tanh().matrix();
    h = (og * tc.array()).matrix();
    gates.middleRows(t * B, B) = a;
    cs.middleRows(t * B, B) = c;
    tanh_cs.middleRows(t * B, B) = tc;
    out.hs.middleRows(t * B, B) = h;
  }
  out.h_last = h;
  out.c_last = c;
  if (tape) {
    tape->steps = static_cast<std::size_t>(steps);
    tape->batch = batch;
    tape->xs = xs;
    tape->h0 = h0;
    tape->c0 = c0;
  }
  return out;
}

// Backward pass through a recorded forward. `dhs` is dLoss/dh_t for every
// row of `hs`; gradients are accumulated into `grad`. No gradient flows into
// the initial state (truncated BPTT). If `dxs` is given it receives dLoss/dx.
template <class T>
void lstm_backward(const LstmWeights<T>& w, const LstmTape<T>& tape, const Matrix<T>& hs,
                   const Matrix<T>& dhs, LstmWeights<T>& grad, std::type_identity_t<Matrix<T>>* dxs) {
  const auto n = static_cast<Eigen::Index>(w.hidden_dim());
  const auto B = static_cast<Eigen::Index>(tape.batch);
  const auto steps = static_cast<Eigen::Index>(tape.steps);
  Matrix<T> dpre(steps * B, 4 * n);
  Matrix<T> dh_next = Matrix<T>::Zero(B, n);
  Matrix<T> dc_next = Matrix<T>::Zero(B, n);
  Matrix<T> dh(B, n), dc(B, n), da(B, 4 * n);
  for (Eigen::Index t = steps - 1; t >= 0; --t) {
    const auto gates = tape.gates.middleRows(t * B, B);
    const auto tc = tape.tanh_cs.middleRows(t * B, B);
    dh = dhs.middleRows(t * B, B) + dh_next;
    for (Eigen::Index r = 0; r < B; ++r) {
      const T* gr = gates.row(r).data();
      const T* tcr = tc.row(r).data();
      const T* cprev = t > 0 ? tape.cs.row((t - 1) * B + r).data() : tape.c0.row(r).data();
      const T* dhr = dh.row(r).data();
      const T* dcn = dc_next.row(r).data();
      T* dar = da.row(r).data();
      T* dcr = dc.row(r).data();
      for (Eigen::Index k = 0; k < n; ++k) {
        const T i = gr[k], f = gr[n + k], g = gr[2 * n + k], o = gr[3 * n + k];
        const T dcell = dhr[k] * o * (T(1) - tcr[k] * tcr[k]) + dcn[k];
        dar[k] = dcell * g * i * (T(1) - i);
        dar[n + k] = dcell * cprev[k] * f * (T(1) - f);
        dar[2 * n + k] = dcell * i * (T(1) - g * g);
        dar[3 * n + k] = dhr[k] * tcr[k] * o * (T(1) - o);
        dcr[k] = dcell * f;
      }
    }
    dpre.middleRows(t * B, B) = da;
    if (t > 0) {
      grad.Wh.noalias() += da.transpose() * hs.middleRows((t - 1) * B, B);
    } else {
      grad.Wh.noalias() += da.transpose() * tape.h0;
    }
    dh_next.noalias() = da * w.Wh;
    dc_next.swap(dc);
  }
  grad.Wx.noalias() += dpre.transpose() * tape.xs;
  grad.b += dpre.colwise().sum().transpose();
  if (dxs) {
    *dxs = dpre * w.Wx;
  }
}

}  // namespace morphoscope
