#pragma once

// Score-scaled probability-flow ODE decoder. Three views of the same map:
//  * decode(): iterative simulation of
//      z_k = (z_{k+1} + (2-rho)/2 * beta_{k+1} * score(z_{k+1})) / sqrt(1-beta_{k+1})
//    from k = t-1 down to 0,
//  * recon_coeffs_exact(): the closed-form affine map x_hat = A z_t + B mu0
//    for Gaussian sources (finite products/sums, no approximation),
//  * recon_coeffs_alt(): the square-root product form, which drops O(beta^2)
//    terms and converges to the exact map as the schedule refines.
// rho = 1 is the plain PF-ODE (reconstruction law = source law); rho = 0
// propagates the posterior mean (Tweedie/MMSE endpoint).

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "rdpflow/schedule.hpp"
#include "rdpflow/sources.hpp"

namespace rdpflow::ode {

namespace detail {
inline void check_rho(double rho) {
  if (!(rho >= 0.0 && rho <= 1.0)) throw std::invalid_argument("rho must lie in [0,1]");
}
inline void check_t(int t, const NoiseSchedule& sched) {
  if (t < 1 || t > sched.steps()) throw std::out_of_range("decode: time index out of range");
}
inline void check_oracle_schedule(const NoiseSchedule& sched, const ScoreOracle& oracle) {
  if (&oracle.schedule() == &sched) return;
  if (!(oracle.schedule() == sched))
    throw std::invalid_argument("decode: oracle is bound to a different schedule");
}
}  // namespace detail

// One reverse step with step variance beta_step.
inline Eigen::VectorXd ode_step(const Eigen::VectorXd& z_next, const Eigen::VectorXd& grad,
                                double beta_step, double rho) {
  if (!(beta_step > 0.0 && beta_step < 1.0))
    throw std::invalid_argument("ode_step: beta outside (0,1)");
  detail::check_rho(rho);
  return (z_next + (0.5 * (2.0 - rho) * beta_step) * grad) / std::sqrt(1.0 - beta_step);
}

// Deterministic reconstruction from z_t; single rho for all coordinates.
inline Eigen::VectorXd decode(const Eigen::VectorXd& z_t, int t, double rho,
                              const NoiseSchedule& sched, const ScoreOracle& oracle) {
  detail::check_rho(rho);
  detail::check_t(t, sched);
  detail::check_oracle_schedule(sched, oracle);
  Eigen::VectorXd z = z_t;
  Eigen::VectorXd grad(oracle.dim());
  for (int k = t - 1; k >= 0; --k) {
    const double beta = sched.beta(k + 1);
    oracle.score_into(z, k + 1, grad);
    z += (0.5 * (2.0 - rho) * beta) * grad;
    z /= std::sqrt(1.0 - beta);
  }
  return z;
}

// Per-dimension variant: coordinate l of the eigenbasis-rotated state runs
// its own ODE with rho[l]. Requires an oracle that exposes the eigenbasis.
inline Eigen::VectorXd decode(const Eigen::VectorXd& z_t, int t, const Eigen::VectorXd& rho,
                              const NoiseSchedule& sched, const ScoreOracle& oracle) {
  detail::check_t(t, sched);
  detail::check_oracle_schedule(sched, oracle);
  const auto* gauss_oracle = dynamic_cast<const GaussianScoreOracle*>(&oracle);
  if (gauss_oracle == nullptr || oracle.gaussian() == nullptr)
    throw std::invalid_argument(
        "decode: per-dimension mode needs a Gaussian oracle with an eigenbasis");
  const GaussianSource& src = *oracle.gaussian();
  if (rho.size() != src.dim())
    throw std::invalid_argument("decode: rho vector length does not match source dimension");
  for (int l = 0; l < rho.size(); ++l) detail::check_rho(rho[l]);

  Eigen::VectorXd y = src.eigvecs().transpose() * z_t;
  for (int k = t - 1; k >= 0; --k) {
    const double beta = sched.beta(k + 1);
    const double inv_root = 1.0 / std::sqrt(1.0 - beta);
    for (int l = 0; l < y.size(); ++l) {
      const double g = gauss_oracle->eigen_score(y[l], k + 1, l);
      y[l] = (y[l] + 0.5 * (2.0 - rho[l]) * beta * g) * inv_root;
    }
  }
  return src.eigvecs() * y;
}

// Marginal-std contraction ratio of one eigen-coordinate,
//   f = prod_{i=0}^{t-1} (rho + (1-rho) alpha_{i+1} sigma_i^2 / sigma_{i+1}^2)^(1/2),
// evaluated in log space. f = 1 at rho = 1; f = sqrt(abar_t lambda)/sigma_t at
// rho = 0; monotone nondecreasing in rho.
inline double contraction_factor(double lambda, const NoiseSchedule& sched, int t, double rho) {
  if (!(lambda > 0.0)) throw std::invalid_argument("contraction_factor: lambda must be positive");
  detail::check_rho(rho);
  detail::check_t(t, sched);
  // alpha_{i+1} sigma_i^2 / sigma_{i+1}^2 == 1 - beta_{i+1}/sigma_{i+1}^2 exactly.
  double log_acc = 0.0;
  for (int i = 0; i < t; ++i) {
    const double s2 = perturbed_eigenvalue(lambda, sched.alpha_bar(i + 1));
    log_acc += std::log1p(-(1.0 - rho) * sched.beta(i + 1) / s2);
  }
  return std::exp(0.5 * log_acc);
}

// Affine reconstruction map x_hat = A z_t + B mu0.
struct ReconCoeffs {
  Eigen::MatrixXd A;
  Eigen::MatrixXd B;
  // Scalar views (d = 1).
  double a() const { return A(0, 0); }
  double b() const { return B(0, 0); }
};

namespace detail {

// All Sigma_i share the source eigenbasis, so the matrix products reduce to
// scalar recursions on each eigenvalue.
template <typename PerEigen>
ReconCoeffs assemble(const GaussianSource& src, PerEigen&& per_eigen) {
  const int d = src.dim();
  Eigen::VectorXd a(d), b(d);
  for (int l = 0; l < d; ++l) {
    auto [al, bl] = per_eigen(src.eigvals()[l]);
    a[l] = al;
    b[l] = bl;
  }
  ReconCoeffs out;
  out.A = src.eigvecs() * a.asDiagonal() * src.eigvecs().transpose();
  out.B = src.eigvecs() * b.asDiagonal() * src.eigvecs().transpose();
  return out;
}

}  // namespace detail

// Exact finite products/sums:
//   A = sqrt(abar_t) Sigma0 prod_{i=0}^{t-1}(I + rho/2 * beta_{i+1}/alpha_{i+1} Sigma_i^{-1}) Sigma_t^{-1}
//   B = (2-rho)/2 * ( sum_{i=2}^t abar_{i-1} beta_i Sigma0 prod_{j=0}^{i-2}(...) Sigma_{i-1}^{-1} Sigma_i^{-1}
//                     + beta_1 Sigma_1^{-1} )
inline ReconCoeffs recon_coeffs_exact(const GaussianSource& src, const NoiseSchedule& sched,
                                      int t, double rho) {
  detail::check_rho(rho);
  detail::check_t(t, sched);
  return detail::assemble(src, [&](double lambda) {
    auto s2 = [&](int i) { return perturbed_eigenvalue(lambda, sched.alpha_bar(i)); };
    double prod = 1.0;  // prod_{j=0}^{m-1} of the bracket factors, m = i-1 below
    double bsum = sched.beta(1) / s2(1);
    for (int i = 2; i <= t; ++i) {
      prod *= 1.0 + 0.5 * rho * sched.beta(i - 1) / (sched.alpha(i - 1) * s2(i - 2));
      bsum += sched.alpha_bar(i - 1) * sched.beta(i) * lambda * prod / (s2(i - 1) * s2(i));
    }
    prod *= 1.0 + 0.5 * rho * sched.beta(t) / (sched.alpha(t) * s2(t - 1));
    const double a = std::sqrt(sched.alpha_bar(t)) * lambda * prod / s2(t);
    const double b = 0.5 * (2.0 - rho) * bsum;
    return std::pair{a, b};
  });
}

// Square-root product form (drops O(beta^2) terms):
//   A = Sigma0^(1/2) prod_{i=0}^{t-1}(rho I + (1-rho) alpha_{i+1} Sigma_i Sigma_{i+1}^{-1})^(1/2) Sigma_t^(-1/2)
//   B = (2-rho) ( I - sqrt(abar_t) Sigma0^(1/2) Sigma_t^(-1/2)
//                 - sum_{i=1}^{t-1} 1/2 sqrt(abar_i) beta_{i+1} Sigma0^(1/2)
//                   (I - prod_{j=0}^{i-1}(...)^(1/2)) Sigma_{i+1}^{-1} Sigma_i^(-1/2) )
inline ReconCoeffs recon_coeffs_alt(const GaussianSource& src, const NoiseSchedule& sched, int t,
                                    double rho) {
  detail::check_rho(rho);
  detail::check_t(t, sched);
  return detail::assemble(src, [&](double lambda) {
    auto s2 = [&](int i) { return perturbed_eigenvalue(lambda, sched.alpha_bar(i)); };
    const double root_lambda = std::sqrt(lambda);
    double sqf = 1.0;  // prod_{j=0}^{i-1} sqrt(rho + (1-rho) alpha_{j+1} s_j^2/s_{j+1}^2)
    double bsum = 0.0;
    for (int i = 1; i <= t - 1; ++i) {
      sqf *= std::sqrt(1.0 - (1.0 - rho) * sched.beta(i) / s2(i));
      bsum += 0.5 * std::sqrt(sched.alpha_bar(i)) * sched.beta(i + 1) * root_lambda *
              (1.0 - sqf) / (s2(i + 1) * std::sqrt(s2(i)));
    }
    sqf *= std::sqrt(1.0 - (1.0 - rho) * sched.beta(t) / s2(t));
    const double sigma_t = std::sqrt(s2(t));
    const double a = root_lambda * sqf / sigma_t;
    const double b =
        (2.0 - rho) * (1.0 - std::sqrt(sched.alpha_bar(t)) * root_lambda / sigma_t - bsum);
    return std::pair{a, b};
  });
}

// Law of the reconstruction when z_t ~ p_{Z_t}: mean mu0 exactly, covariance
// Sigma0 prod_{i=0}^{t-1}(rho I + (1-rho) alpha_{i+1} Sigma_i Sigma_{i+1}^{-1}).
// rho = 1 returns the source law; rho = 0 returns N(mu0, abar_t Sigma0^2 Sigma_t^{-1}).
inline GaussianSource marginal_of_recon(const GaussianSource& src, const NoiseSchedule& sched,
                                        int t, double rho) {
  detail::check_rho(rho);
  detail::check_t(t, sched);
  const int d = src.dim();
  Eigen::VectorXd ev(d);
  for (int l = 0; l < d; ++l) {
    const double lambda = src.eigvals()[l];
    double prod = lambda;
    for (int i = 0; i < t; ++i) {
      const double s2 = perturbed_eigenvalue(lambda, sched.alpha_bar(i + 1));
      prod *= 1.0 - (1.0 - rho) * sched.beta(i + 1) / s2;
    }
    ev[l] = prod;
  }
  Eigen::MatrixXd cov = src.eigvecs() * ev.asDiagonal() * src.eigvecs().transpose();
  return GaussianSource(src.mean(), 0.5 * (cov + cov.transpose()));
}

}  // namespace rdpflow::ode
