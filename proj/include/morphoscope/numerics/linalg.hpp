#pragma once

// Dense matrices and the handful of kernels the models need. Storage is
// Eigen's row-major dynamic matrix; the free functions below add the shape
// checks and the numerically stable forms used everywhere else.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace morphoscope {

template <class T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <class T>
using Vector = Eigen::Matrix<T, Eigen::Dynamic, 1>;

namespace detail {

inline std::string shape_str(Eigen::Index r, Eigen::Index c) {
  return std::to_string(r) + "x" + std::to_string(c);
}

}  // namespace detail

template <class T>
std::span<T> as_span(Matrix<T>& m) {
  return {m.data(), static_cast<std::size_t>(m.size())};
}
template <class T>
std::span<const T> as_span(const Matrix<T>& m) {
  return {m.data(), static_cast<std::size_t>(m.size())};
}
template <class T>
std::span<T> as_span(Vector<T>& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}
template <class T>
std::span<const T> as_span(const Vector<T>& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}

template <class T>
Matrix<T> matmul(const Matrix<T>& a, const Matrix<T>& b) {
  if (a.cols() != b.rows()) {
    throw std::invalid_argument("matmul: shapes " + detail::shape_str(a.rows(), a.cols()) +
                                " and " + detail::shape_str(b.rows(), b.cols()) +
                                " do not conform");
  }
  return a * b;
}

template <class T>
Vector<T> matvec(const Matrix<T>& a, const Vector<T>& x) {
  if (a.cols() != x.size()) {
    throw std::invalid_argument("matvec: " + detail::shape_str(a.rows(), a.cols()) +
                                " times vector of length " + std::to_string(x.size()));
  }
  return a * x;
}

// Adds `bias` to every row of `m`.
template <class T>
void add_bias(Matrix<T>& m, const Vector<T>& bias) {
  if (m.cols() != bias.size()) {
    throw std::invalid_argument("add_bias: bias length " + std::to_string(bias.size()) +
                                " for " + std::to_string(m.cols()) + " columns");
  }
  m.rowwise() += bias.transpose();
}

template <class T>
T sigmoid(T x) {
  // Split on sign so exp never overflows.
  if (x >= T(0)) {
    return T(1) / (T(1) + std::exp(-x));
  }
  const T e = std::exp(x);
  return e / (T(1) + e);
}

template <class Derived>
void sigmoid_inplace(Eigen::MatrixBase<Derived>& m) {
  using T = typename Derived::Scalar;
  m = m.unaryExpr([](T v) { return sigmoid(v); });
}

template <class Derived>
void tanh_inplace(Eigen::MatrixBase<Derived>& m) {
  m = m.array().tanh().matrix();
}

template <class T>
Matrix<T> hadamard(const Matrix<T>& a, const Matrix<T>& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument("hadamard: shapes " + detail::shape_str(a.rows(), a.cols()) +
                                " and " + detail::shape_str(b.rows(), b.cols()) + " differ");
  }
  return a.cwiseProduct(b);
}

// Max-subtracted softmax. Throws on empty or non-finite input.
template <class T>
std::vector<T> softmax(std::span<const T> logits) {
  if (logits.empty()) {
    throw std::invalid_argument("softmax: empty input");
  }
  T hi = logits[0];
  for (T v : logits) {
    if (!std::isfinite(v)) {
      throw std::invalid_argument("softmax: non-finite logit");
    }
    hi = std::max(hi, v);
  }
  std::vector<T> out(logits.size());
  T total = 0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - hi);
    total += out[i];
  }
  for (T& v : out) {
    v /= total;
  }
  return out;
}

template <class T>
std::vector<T> softmax(const std::vector<T>& logits) {
  return softmax(std::span<const T>(logits));
}

// Row-wise softmax in place, same stabilisation as above. No finiteness check
// (hot path); callers validate losses instead.
template <class Derived>
void softmax_rows_inplace(Eigen::MatrixBase<Derived>& m) {
  using T = typename Derived::Scalar;
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    const T hi = row.maxCoeff();
    row = (row.array() - hi).exp().matrix();
    row /= row.sum();
  }
}

inline constexpr double kProbFloor = 1e-12;

// -ln p[target], with p[target] clamped below at 1e-12.
template <class T>
double cross_entropy(std::span<const T> probs, std::size_t target) {
  if (target >= probs.size()) {
    throw std::invalid_argument("cross_entropy: target " + std::to_string(target) +
                                " out of range for " + std::to_string(probs.size()) + " classes");
  }
  return -std::log(std::max(static_cast<double>(probs[target]), kProbFloor));
}

template <class T>
double cross_entropy(const std::vector<T>& probs, std::size_t target) {
  return cross_entropy(std::span<const T>(probs), target);
}

template <class T>
bool all_finite(std::span<const T> xs) {
  return std::all_of(xs.begin(), xs.end(), [](T v) { return std::isfinite(v); });
}

}  // namespace morphoscope
