#pragma once

// Small statistics helpers shared by the Monte Carlo harness, the RCC
// self-test and the test suites.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace rdpflow::stats {

inline double normal_cdf(double x, double mean = 0.0, double stddev = 1.0) {
  return 0.5 * std::erfc(-(x - mean) / (stddev * std::numbers::sqrt2));
}

// One-sample Kolmogorov-Smirnov statistic against a continuous CDF.
inline double ks_statistic(std::vector<double> xs, const std::function<double(double)>& cdf) {
  if (xs.empty()) throw std::invalid_argument("ks_statistic: empty sample");
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double d = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double f = cdf(xs[i]);
    d = std::max(d, std::max(f - static_cast<double>(i) / n,
                             static_cast<double>(i + 1) / n - f));
  }
  return d;
}

// Asymptotic critical value at significance alpha.
inline double ks_critical(std::size_t n, double alpha) {
  return std::sqrt(-std::log(alpha / 2.0) / (2.0 * static_cast<double>(n)));
}

// Two-sample Kolmogorov-Smirnov statistic.
inline double ks_statistic_two_sample(std::vector<double> xs, std::vector<double> ys) {
  if (xs.empty() || ys.empty()) throw std::invalid_argument("ks: empty sample");
  std::sort(xs.begin(), xs.end());
  std::sort(ys.begin(), ys.end());
  double d = 0.0;
  std::size_t i = 0, j = 0;
  while (i < xs.size() && j < ys.size()) {
    if (xs[i] <= ys[j])
      ++i;
    else
      ++j;
    d = std::max(d, std::fabs(static_cast<double>(i) / xs.size() -
                              static_cast<double>(j) / ys.size()));
  }
  return d;
}

inline double ks_critical_two_sample(std::size_t n, std::size_t m, double alpha) {
  const double nm = static_cast<double>(n) * static_cast<double>(m);
  return std::sqrt(-std::log(alpha / 2.0) / 2.0) *
         std::sqrt(static_cast<double>(n + m) / nm);
}

// Deterministic pairwise reduction (tree fixed by element order).
inline double pairwise_sum(const std::vector<double>& v, std::size_t lo, std::size_t hi) {
  if (hi - lo == 1) return v[lo];
  const std::size_t mid = lo + (hi - lo) / 2;
  return pairwise_sum(v, lo, mid) + pairwise_sum(v, mid, hi);
}

inline double pairwise_sum(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  return pairwise_sum(v, 0, v.size());
}

// Leave-one-out jackknife standard error from per-batch statistics: the
// caller supplies theta(-b) for each batch b.
inline double jackknife_se(const std::vector<double>& leave_one_out) {
  const std::size_t b = leave_one_out.size();
  if (b < 2) return 0.0;
  double mean = 0.0;
  for (double v : leave_one_out) mean += v;
  mean /= static_cast<double>(b);
  double acc = 0.0;
  for (double v : leave_one_out) acc += (v - mean) * (v - mean);
  return std::sqrt(acc * static_cast<double>(b - 1) / static_cast<double>(b));
}

}  // namespace rdpflow::stats
