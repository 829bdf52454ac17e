#pragma once

#include "morphoscope/numerics/linalg.hpp"

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace morphoscope {

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Moments for one flat parameter array.
template <class T>
struct AdamState {
  std::vector<T> m;
  std::vector<T> v;
  std::uint64_t t = 0;
  AdamHyper hyper;

  AdamState() = default;
  explicit AdamState(std::size_t n) : m(n, T(0)), v(n, T(0)) {}
};

// One bias-corrected Adam update on a flat array.
template <class T>
void adam_step(std::span<T> param, std::span<const T> grad, AdamState<T>& state, double lr) {
  if (param.size() != grad.size() || state.m.size() != param.size() ||
      state.v.size() != param.size()) {
    throw std::invalid_argument("adam_step: parameter, gradient and moment sizes differ");
  }
  state.t += 1;
  const double b1 = state.hyper.beta1;
  const double b2 = state.hyper.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.t));
  const T step = static_cast<T>(lr / c1);
  const T vcorr = static_cast<T>(1.0 / c2);
  const T eps = static_cast<T>(state.hyper.eps);
  const T tb1 = static_cast<T>(b1), tb2 = static_cast<T>(b2);
  for (std::size_t i = 0; i < param.size(); ++i) {
    const T g = grad[i];
    state.m[i] = tb1 * state.m[i] + (T(1) - tb1) * g;
    state.v[i] = tb2 * state.v[i] + (T(1) - tb2) * g * g;
    param[i] -= step * state.m[i] / (std::sqrt(state.v[i] * vcorr) + eps);
  }
}

template <class T>
void adam_step(Matrix<T>& param, const Matrix<T>& grad, AdamState<T>& state, double lr) {
  if (param.rows() != grad.rows() || param.cols() != grad.cols()) {
    throw std::invalid_argument("adam_step: shape mismatch " +
                                detail::shape_str(param.rows(), param.cols()) + " vs " +
                                detail::shape_str(grad.rows(), grad.cols()));
  }
  adam_step(as_span(param), as_span(grad), state, lr);
}

// Plain SGD, for completeness and for optimizer-free sanity checks.
template <class T>
void sgd_step(std::span<T> param, std::span<const T> grad, double lr) {
  if (param.size() != grad.size()) {
    throw std::invalid_argument("sgd_step: size mismatch");
  }
  for (std::size_t i = 0; i < param.size(); ++i) {
    param[i] -= static_cast<T>(lr) * grad[i];
  }
}

// Scales all gradients so that their joint L2 norm is at most max_norm.
// Returns the norm before clipping.
template <class T>
double clip_global_norm(std::span<const std::span<T>> grads, double max_norm) {
  double sq = 0;
  for (auto g : grads) {
    for (T v : g) {
      sq += static_cast<double>(v) * static_cast<double>(v);
    }
  }
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0) {
    const T scale = static_cast<T>(max_norm / norm);
    for (auto g : grads) {
      for (T& v : g) {
        v *= scale;
      }
    }
  }
  return norm;
}

}  // namespace morphoscope
