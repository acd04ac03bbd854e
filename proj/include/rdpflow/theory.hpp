#pragma once

// Closed-form tradeoff evaluators for Gaussian sources observed through the
// AWGN channel Z_t = sqrt(abar_t) X + sqrt(1-abar_t) N:
//  * dp_scalar / dp_multivariate      - optimal distortion given a squared-W2
//                                       perception budget
//  * achievable_dp_*                  - the (D, P) pair reached by the
//                                       score-scaled ODE at a given rho
//  * rdp_scalar                       - scalar information RDP function
//  * mutual_info                      - I(X; Z_t)
//  * rate_bounds                      - one-shot index-coding envelope
//  * kkt_allocation / solve_rho_per_dim / achievable_dp_multivariate
//                                     - water-filling split of the perception
//                                       budget across eigen-coordinates and
//                                       the per-dimension rho that realizes it
// Rates are nats internally; interfaces expose bits views where stated.

#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <utility>

#include "rdpflow/schedule.hpp"
#include "rdpflow/ssode.hpp"

namespace rdpflow::theory {

struct DpPoint {
  double distortion = 0.0;  // mean squared error
  double perception = 0.0;  // squared W2
};

enum class Provenance { kTheoretical, kEmpirical };

struct RdpTriplet {
  double rate_nats = 0.0;
  double distortion = 0.0;
  double perception = 0.0;
  Provenance tag = Provenance::kTheoretical;
  double rate_bits() const { return rate_nats / std::numbers::ln2; }
};

inline double bits(double nats) { return nats / std::numbers::ln2; }
inline double nats(double bits) { return bits * std::numbers::ln2; }

namespace detail {
inline void check_alpha_bar(double ab) {
  if (!(ab > 0.0 && ab < 1.0)) throw std::domain_error("alpha_bar_t must lie in (0,1)");
}
}  // namespace detail

// Scalar DP function D_t(P). Branch 1 while sqrt(P) < sigma0 - sqrt(abar) sigma0^2 / sigma_t,
// otherwise the MMSE floor (1-abar) sigma0^2 / sigma_t^2.
inline double dp_scalar(double sigma0, double alpha_bar_t, double perception) {
  if (!(sigma0 > 0.0)) throw std::domain_error("dp_scalar: sigma0 must be positive");
  detail::check_alpha_bar(alpha_bar_t);
  if (!(perception >= 0.0)) throw std::domain_error("dp_scalar: perception must be >= 0");
  const double s2 = sigma0 * sigma0;
  const double sigma_t = std::sqrt(perturbed_eigenvalue(s2, alpha_bar_t));
  const double floor = (1.0 - alpha_bar_t) * s2 / (sigma_t * sigma_t);
  const double threshold = sigma0 - std::sqrt(alpha_bar_t) * s2 / sigma_t;
  const double root_p = std::sqrt(perception);
  if (root_p < threshold) {
    const double gap = sigma0 - root_p - std::sqrt(alpha_bar_t) * s2 / sigma_t;
    return floor + gap * gap;
  }
  return floor;
}

// Perception budget beyond which the constraint is inactive:
// S = sum_l lambda_l (1 - sqrt(abar lambda_l / lambda_l^{(t)}))^2.
inline double perception_saturation(const Eigen::VectorXd& lambdas, double alpha_bar_t) {
  double s = 0.0;
  for (int l = 0; l < lambdas.size(); ++l) {
    if (!(lambdas[l] > 0.0)) throw std::domain_error("eigenvalues must be positive");
    const double lt = perturbed_eigenvalue(lambdas[l], alpha_bar_t);
    const double g = std::sqrt(alpha_bar_t * lambdas[l] / lt);
    s += lambdas[l] * (1.0 - g) * (1.0 - g);
  }
  return s;
}

inline double mmse_floor(const Eigen::VectorXd& lambdas, double alpha_bar_t) {
  double f = 0.0;
  for (int l = 0; l < lambdas.size(); ++l)
    f += (1.0 - alpha_bar_t) * lambdas[l] / perturbed_eigenvalue(lambdas[l], alpha_bar_t);
  return f;
}

// Multivariate DP function: (sqrt(S) - sqrt(P))^2 + MMSE floor for P < S,
// the floor alone once the budget saturates.
inline double dp_multivariate(const Eigen::VectorXd& lambdas, double alpha_bar_t,
                              double perception) {
  detail::check_alpha_bar(alpha_bar_t);
  if (!(perception >= 0.0)) throw std::domain_error("dp_multivariate: perception must be >= 0");
  const double s = perception_saturation(lambdas, alpha_bar_t);
  const double floor = mmse_floor(lambdas, alpha_bar_t);
  if (perception >= s) return floor;
  const double gap = std::sqrt(s) - std::sqrt(perception);
  return gap * gap + floor;
}

// (D, P) reached by the score-scaled ODE at (t, rho) for one eigen-coordinate
// with variance lambda.
inline DpPoint achievable_dp_eigen(double lambda, const NoiseSchedule& sched, int t, double rho) {
  const double ab = sched.alpha_bar(t);
  const double lt = perturbed_eigenvalue(lambda, ab);
  const double f = ode::contraction_factor(lambda, sched, t, rho);
  const double g = std::sqrt(ab * lambda / lt);
  DpPoint out;
  out.distortion = lambda * (f - g) * (f - g) + lambda - ab * lambda * lambda / lt;
  out.perception = lambda * (1.0 - f) * (1.0 - f);
  return out;
}

inline DpPoint achievable_dp_scalar(double sigma0, const NoiseSchedule& sched, int t, double rho) {
  if (!(sigma0 > 0.0)) throw std::domain_error("achievable_dp_scalar: sigma0 must be positive");
  return achievable_dp_eigen(sigma0 * sigma0, sched, t, rho);
}

// Tensorized prediction for a Gaussian source decoded with one rho on every
// eigen-coordinate.
inline DpPoint achievable_dp_gaussian(const Eigen::VectorXd& lambdas, const NoiseSchedule& sched,
                                      int t, double rho) {
  DpPoint out;
  for (int l = 0; l < lambdas.size(); ++l) {
    const DpPoint p = achievable_dp_eigen(lambdas[l], sched, t, rho);
    out.distortion += p.distortion;
    out.perception += p.perception;
  }
  return out;
}

// Scalar information RDP function (nats). The branch condition is implemented
// exactly as printed; the test suite pins behavior at sigma0 = 1, where the
// threshold is dimensionally unambiguous.
inline double rdp_scalar(double sigma0, double distortion, double perception) {
  if (!(sigma0 > 0.0)) throw std::domain_error("rdp_scalar: sigma0 must be positive");
  if (!(distortion > 0.0)) throw std::domain_error("rdp_scalar: distortion must be positive");
  if (!(perception >= 0.0)) throw std::domain_error("rdp_scalar: perception must be >= 0");
  const double s2 = sigma0 * sigma0;
  const double root_p = std::sqrt(perception);
  if (root_p < sigma0 - std::sqrt(std::fabs(sigma0 - distortion))) {
    const double shrunk = sigma0 - root_p;
    const double shrunk2 = shrunk * shrunk;
    const double num = s2 * shrunk2;
    const double gap = s2 + shrunk2 - distortion;
    const double den = num - 0.25 * gap * gap;
    if (!(den > 0.0))
      throw std::domain_error("rdp_scalar: infeasible (D,P) pair (nonpositive denominator)");
    return 0.5 * std::log(num / den);
  }
  return std::max(0.5 * std::log(s2 / distortion), 0.0);
}

// I(X; Z_t) = 1/2 ln(abar_t sigma0^2 / (1 - abar_t) + 1), nats.
inline double mutual_info(double sigma0, double alpha_bar_t) {
  if (!(sigma0 > 0.0)) throw std::domain_error("mutual_info: sigma0 must be positive");
  detail::check_alpha_bar(alpha_bar_t);
  return 0.5 * std::log1p(alpha_bar_t * sigma0 * sigma0 / (1.0 - alpha_bar_t));
}

inline double mutual_info(const Eigen::VectorXd& lambdas, double alpha_bar_t) {
  double acc = 0.0;
  for (int l = 0; l < lambdas.size(); ++l)
    acc += mutual_info(std::sqrt(lambdas[l]), alpha_bar_t);
  return acc;
}

// One-shot index-coding envelope for information I (input nats), in bits:
// lower = I, upper = I + log2(I + 1) + 4.
struct RateBounds {
  double lower_bits = 0.0;
  double upper_bits = 0.0;
};

inline RateBounds rate_bounds(double info_nats) {
  if (!(info_nats >= 0.0)) throw std::domain_error("rate_bounds: information must be >= 0");
  const double b = bits(info_nats);
  return {b, b + std::log2(b + 1.0) + 4.0};
}

// Water-filling split of the perception budget across eigen-coordinates.
// For P >= S the constraint is slack (nu0 = 0, f_l at the MMSE gain); for
// 0 < P < S, nu0 = sqrt(S/P) - 1 and f_l = 1 - (1 - g_l) sqrt(P/S).
struct Allocation {
  double nu0 = 0.0;
  Eigen::VectorXd f;
  Eigen::VectorXd rho;  // filled by achievable_dp_multivariate
};

inline Allocation kkt_allocation(const Eigen::VectorXd& lambdas, double alpha_bar_t,
                                 double perception) {
  detail::check_alpha_bar(alpha_bar_t);
  if (!(perception >= 0.0)) throw std::domain_error("kkt_allocation: perception must be >= 0");
  const double s = perception_saturation(lambdas, alpha_bar_t);
  Allocation out;
  out.f.resize(lambdas.size());
  const bool slack = perception >= s;
  const double shrink = slack ? 1.0 : std::sqrt(perception / s);
  out.nu0 = slack ? 0.0
                  : (perception > 0.0 ? std::sqrt(s / perception) - 1.0
                                      : std::numeric_limits<double>::infinity());
  for (int l = 0; l < lambdas.size(); ++l) {
    const double lt = perturbed_eigenvalue(lambdas[l], alpha_bar_t);
    const double g = std::sqrt(alpha_bar_t * lambdas[l] / lt);
    out.f[l] = slack ? g : 1.0 - (1.0 - g) * shrink;
  }
  return out;
}

// Invert contraction_factor(lambda, t, .) = f_target by bisection on the
// monotone map; tolerance 1e-12 on f.
inline double solve_rho_per_dim(double lambda, const NoiseSchedule& sched, int t,
                                double f_target) {
  const double f0 = ode::contraction_factor(lambda, sched, t, 0.0);
  // Targets produced by other closed forms can undershoot the product floor
  // by a few ulps; clamp inside the representable range.
  if (!(f_target >= f0 - 1e-9 && f_target <= 1.0 + 1e-12))
    throw std::domain_error("solve_rho_per_dim: target contraction unreachable at this t");
  f_target = std::min(std::max(f_target, f0), 1.0);
  if (f_target == 1.0) return 1.0;
  if (f_target == f0) return 0.0;
  double lo = 0.0, hi = 1.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double f = ode::contraction_factor(lambda, sched, t, mid);
    if (std::fabs(f - f_target) <= 1e-12) return mid;
    (f < f_target ? lo : hi) = mid;
    if (hi - lo < 1e-17) break;
  }
  return 0.5 * (lo + hi);
}

// Compose the allocation with the per-dimension rho solver; the returned
// point matches dp_multivariate at the same budget.
inline std::pair<DpPoint, Allocation> achievable_dp_multivariate(const Eigen::VectorXd& lambdas,
                                                                 const NoiseSchedule& sched,
                                                                 int t, double perception) {
  const double ab = sched.alpha_bar(t);
  const double s = perception_saturation(lambdas, ab);
  if (!(perception >= 0.0 && perception <= s))
    throw std::domain_error("achievable_dp_multivariate: perception budget outside [0, S]");
  Allocation alloc = kkt_allocation(lambdas, ab, perception);
  alloc.rho.resize(lambdas.size());
  DpPoint point;
  for (int l = 0; l < lambdas.size(); ++l) {
    alloc.rho[l] = solve_rho_per_dim(lambdas[l], sched, t, alloc.f[l]);
    const double lt = perturbed_eigenvalue(lambdas[l], ab);
    const double g = std::sqrt(ab * lambdas[l] / lt);
    const double fl = alloc.f[l];
    point.distortion += lambdas[l] * (fl - g) * (fl - g) +
                        (1.0 - ab) * lambdas[l] / lt;
    point.perception += lambdas[l] * (1.0 - fl) * (1.0 - fl);
  }
  return {point, std::move(alloc)};
}

}  // namespace rdpflow::theory
