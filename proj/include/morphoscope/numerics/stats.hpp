#pragma once

#include "morphoscope/errors.hpp"

#include <cmath>
#include <span>
#include <stdexcept>

namespace morphoscope {

struct MeanStd {
  double mean = 0;
  double std = 0;  // population standard deviation
};

template <class T>
MeanStd mean_std(std::span<const T> xs) {
  if (xs.empty()) {
    throw UndefinedMetric("mean_std: empty sample");
  }
  // Two-pass for accuracy.
  double sum = 0;
  for (T v : xs) {
    sum += static_cast<double>(v);
  }
  const double mean = sum / static_cast<double>(xs.size());
  double sq = 0;
  for (T v : xs) {
    const double d = static_cast<double>(v) - mean;
    sq += d * d;
  }
  return {mean, std::sqrt(sq / static_cast<double>(xs.size()))};
}

// Pearson correlation. Throws UndefinedMetric when either series is constant.
template <class T, class U>
double pearson(std::span<const T> xs, std::span<const U> ys) {
  if (xs.size() != ys.size()) {
    throw std::invalid_argument("pearson: series lengths differ");
  }
  if (xs.size() < 2) {
    throw UndefinedMetric("pearson: need at least two points");
  }
  const double n = static_cast<double>(xs.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += static_cast<double>(xs[i]);
    my += static_cast<double>(ys[i]);
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = static_cast<double>(xs[i]) - mx;
    const double dy = static_cast<double>(ys[i]) - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx <= 0 || syy <= 0) {
    throw UndefinedMetric("pearson: zero variance");
  }
  return sxy / std::sqrt(sxx * syy);
}

// Streaming mean / variance / covariance of paired samples (Welford updates),
// for series too long to keep in memory.
class RunningCovariance {
 public:
  void add(double x, double y) {
    ++n_;
    const double dx = x - mx_;
    const double dy = y - my_;
    mx_ += dx / static_cast<double>(n_);
    my_ += dy / static_cast<double>(n_);
    sxx_ += dx * (x - mx_);
    syy_ += dy * (y - my_);
    sxy_ += dx * (y - my_);
  }

  std::size_t count() const noexcept { return n_; }
  double mean_x() const noexcept { return mx_; }
  double mean_y() const noexcept { return my_; }
  // Population standard deviations.
  double std_x() const noexcept { return n_ ? std::sqrt(sxx_ / static_cast<double>(n_)) : 0.0; }
  double std_y() const noexcept { return n_ ? std::sqrt(syy_ / static_cast<double>(n_)) : 0.0; }

  double pearson() const {
    if (n_ < 2) {
      throw UndefinedMetric("pearson: need at least two points");
    }
    if (sxx_ <= 0 || syy_ <= 0) {
      throw UndefinedMetric("pearson: zero variance");
    }
    return sxy_ / std::sqrt(sxx_ * syy_);
  }

 private:
  std::size_t n_ = 0;
  double mx_ = 0, my_ = 0, sxx_ = 0, syy_ = 0, sxy_ = 0;
};

}  // namespace morphoscope
