#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

namespace morphoscope {

// Central-difference gradient of f at x; x is perturbed in place and restored.
template <class T>
std::vector<T> finite_diff_grad(const std::function<T()>& f, std::span<T> x, T h = T(1e-4)) {
  if (!(h > T(0))) {
    throw std::invalid_argument("finite_diff_grad: step must be positive");
  }
  std::vector<T> grad(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const T saved = x[i];
    x[i] = saved + h;
    const T up = f();
    x[i] = saved - h;
    const T down = f();
    x[i] = saved;
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw std::runtime_error("finite_diff_grad: objective is not finite at coordinate " +
                               std::to_string(i));
    }
    grad[i] = (up - down) / (T(2) * h);
  }
  return grad;
}

// Convenience overload for functions of the array itself.
template <class T>
std::vector<T> finite_diff_grad(const std::function<T(std::span<const T>)>& f, std::vector<T> x,
                                T h = T(1e-4)) {
  std::span<T> xs(x);
  return finite_diff_grad<T>([&] { return f(std::span<const T>(x)); }, xs, h);
}

// max_i |a_i - b_i| / max(|a_i|, |b_i|), with pairs where both magnitudes are
// below `floor` counted as exact.
template <class T>
double max_relative_error(std::span<const T> a, std::span<const T> b, double floor = 1e-10) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("max_relative_error: size mismatch");
  }
  double worst = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double x = static_cast<double>(a[i]);
    const double y = static_cast<double>(b[i]);
    const double scale = std::max(std::abs(x), std::abs(y));
    if (scale < floor) {
      continue;
    }
    worst = std::max(worst, std::abs(x - y) / scale);
  }
  return worst;
}

}  // namespace morphoscope
