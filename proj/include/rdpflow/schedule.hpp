#pragma once

// Discrete-time variance schedule of the Gaussian forward process
//   Z_k = sqrt(alpha_bar_k) X + sqrt(1 - alpha_bar_k) N,   N ~ N(0, I),
// with beta_k per-step variances, alpha_k = 1 - beta_k and
// alpha_bar_k = prod_{i<=k} alpha_i. Time indices are 1-based; index 0 is the
// clean source (alpha_bar_0 = 1) and is rejected by operations that require a
// noisy observation.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace rdpflow {

class NoiseSchedule {
 public:
  // Linear beta ramp from beta_min to beta_max over T steps (the DDPM
  // convention; T = 1 uses beta_min alone).
  static NoiseSchedule linear(int steps, double beta_min, double beta_max) {
    if (steps < 1) throw std::invalid_argument("NoiseSchedule: step count must be >= 1");
    if (!(beta_min > 0.0) || !(beta_max < 1.0) || !(beta_min <= beta_max))
      throw std::invalid_argument("NoiseSchedule: need 0 < beta_min <= beta_max < 1");
    std::vector<double> beta(static_cast<std::size_t>(steps));
    if (steps == 1) {
      beta[0] = beta_min;
    } else {
      const double slope = (beta_max - beta_min) / static_cast<double>(steps - 1);
      for (int k = 0; k < steps; ++k) beta[static_cast<std::size_t>(k)] = beta_min + slope * k;
    }
    return NoiseSchedule(std::move(beta));
  }

  explicit NoiseSchedule(std::vector<double> beta) : beta_(std::move(beta)) {
    if (beta_.empty()) throw std::invalid_argument("NoiseSchedule: empty beta sequence");
    double prev = 0.0;
    for (double b : beta_) {
      if (!(b > 0.0 && b < 1.0)) throw std::invalid_argument("NoiseSchedule: beta outside (0,1)");
      if (b < prev) throw std::invalid_argument("NoiseSchedule: beta must be nondecreasing");
      prev = b;
    }
    // alpha_bar by plain double recurrence: alpha_bar_k is the correctly
    // rounded product of alpha_k with alpha_bar_{k-1}, so the recurrence
    // invariant holds to 1/2 ulp by construction.
    alpha_bar_.resize(beta_.size() + 1);
    alpha_bar_[0] = 1.0;
    for (std::size_t k = 0; k < beta_.size(); ++k)
      alpha_bar_[k + 1] = (1.0 - beta_[k]) * alpha_bar_[k];
  }

  int steps() const { return static_cast<int>(beta_.size()); }

  // k in [1, T]
  double beta(int k) const {
    check_step(k);
    return beta_[static_cast<std::size_t>(k - 1)];
  }
  double alpha(int k) const { return 1.0 - beta(k); }

  // k in [0, T]; alpha_bar(0) = 1
  double alpha_bar(int k) const {
    if (k < 0 || k > steps()) throw std::out_of_range("NoiseSchedule: time index out of range");
    return alpha_bar_[static_cast<std::size_t>(k)];
  }

  friend bool operator==(const NoiseSchedule& a, const NoiseSchedule& b) {
    return a.beta_ == b.beta_;
  }

  // First index whose alpha_bar is nearest the target (ties toward smaller t).
  int nearest_step(double alpha_bar_target) const {
    int best = 1;
    double best_gap = std::fabs(alpha_bar_[1] - alpha_bar_target);
    for (int k = 2; k <= steps(); ++k) {
      const double gap = std::fabs(alpha_bar_[static_cast<std::size_t>(k)] - alpha_bar_target);
      if (gap < best_gap) {
        best_gap = gap;
        best = k;
      }
    }
    return best;
  }

 private:
  void check_step(int k) const {
    if (k < 1 || k > steps()) throw std::out_of_range("NoiseSchedule: time index out of range");
  }

  std::vector<double> beta_;
  std::vector<double> alpha_bar_;
};

// Eigenvalue of the perturbed covariance at level t: alpha_bar_t * lambda +
// (1 - alpha_bar_t). With lambda = sigma0^2 this is the scalar sigma_t^2.
inline double perturbed_eigenvalue(double lambda, double alpha_bar_t) {
  return alpha_bar_t * lambda + (1.0 - alpha_bar_t);
}

}  // namespace rdpflow
