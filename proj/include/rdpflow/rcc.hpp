#pragma once

// Reverse channel coding: Poisson-functional-representation selection over a
// shared candidate stream, Zipf index codelengths, and the chained
// progressive encoder/decoder that transmits z_t step by step.
//
// Candidates and Exp(1) arrival gaps are addressed by
// (seed, stream, step k, candidate n), so the decoder regenerates candidate
// #index in O(1) from the shared stream without scanning. Chains on
// multivariate Gaussian sources run in the source eigenbasis, where every
// step law is diagonal; z values cross the API in the original basis.

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "rdpflow/rng.hpp"
#include "rdpflow/schedule.hpp"
#include "rdpflow/sources.hpp"

namespace rdpflow::rcc {

// Gaussian law with diagonal covariance.
struct DiagGaussian {
  Eigen::VectorXd mean;
  Eigen::VectorXd var;

  double log_density(const Eigen::VectorXd& z) const {
    double acc = 0.0;
    for (int j = 0; j < mean.size(); ++j) {
      const double r = z[j] - mean[j];
      acc += r * r / var[j] + std::log(2.0 * std::numbers::pi * var[j]);
    }
    return -0.5 * acc;
  }
};

inline double kl_diag(const DiagGaussian& a, const DiagGaussian& b) {
  double acc = 0.0;
  for (int j = 0; j < a.mean.size(); ++j) {
    const double r = a.mean[j] - b.mean[j];
    acc += a.var[j] / b.var[j] + r * r / b.var[j] - 1.0 + std::log(b.var[j] / a.var[j]);
  }
  return 0.5 * acc;
}

// One progressive step: the conditional the encoder must realize and the
// shared model it codes against.
struct StepChannel {
  DiagGaussian target;    // p(z_k | z_{k+1}, x)
  DiagGaussian proposal;  // p(z_k | z_{k+1}) under the source model
  double kl_nats = 0.0;

  static StepChannel make(DiagGaussian target, DiagGaussian proposal) {
    if (target.mean.size() != proposal.mean.size())
      throw std::invalid_argument("StepChannel: law dimension mismatch");
    StepChannel ch{std::move(target), std::move(proposal), 0.0};
    ch.kl_nats = kl_diag(ch.target, ch.proposal);
    return ch;
  }
};

// Riemann zeta for s > 1 (Euler-Maclaurin, |error| < 1e-13 on s in (1, 8]).
inline double riemann_zeta(double s) {
  if (!(s > 1.0)) throw std::domain_error("riemann_zeta: need s > 1");
  constexpr int kCut = 32;
  double acc = 0.0;
  for (int k = 1; k < kCut; ++k) acc += std::pow(k, -s);
  const double n = kCut;
  const double ns = std::pow(n, -s);
  acc += n * ns / (s - 1.0) + 0.5 * ns;
  acc += s * ns / (12.0 * n);
  acc -= s * (s + 1.0) * (s + 2.0) * ns / (720.0 * n * n * n);
  acc += s * (s + 1.0) * (s + 2.0) * (s + 3.0) * (s + 4.0) * ns / (30240.0 * std::pow(n, 5));
  return acc;
}

// Codelength in bits of `index` under Zipf(s) with s = 1 + 1/(I_bits + 1);
// info is passed in nats. s is floored at 1 + 1e-6 so the normalizer stays
// finite as the information grows.
inline double zipf_codelength(std::uint64_t index, double info_nats) {
  if (index < 1) throw std::invalid_argument("zipf_codelength: index must be >= 1");
  if (!(info_nats >= 0.0)) throw std::domain_error("zipf_codelength: information must be >= 0");
  const double info_bits = info_nats / std::numbers::ln2;
  const double s = std::max(1.0 + 1.0 / (info_bits + 1.0), 1.0 + 1e-6);
  return s * std::log2(static_cast<double>(index)) + std::log2(riemann_zeta(s));
}

// Shared-randomness coordinates of one selection.
struct PfrStream {
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;  // e.g. trial id
  std::uint64_t step = 0;    // chain step k (0 for standalone use)
};

struct PfrTranscript {
  std::uint64_t index = 0;  // selected candidate, 1-based
  double codelength_bits = 0.0;
  std::uint64_t candidates_examined = 0;
  bool cap_hit = false;  // stopping rule not certified within the cap
  double kl_nats = 0.0;
  PfrStream stream;  // identifies the shared candidate stream
};

namespace detail {

inline Eigen::VectorXd candidate(const DiagGaussian& proposal, const PfrStream& s,
                                 std::uint64_t n) {
  rng::Counter c(s.seed, rng::Domain::kPfrCandidate, s.stream, s.step, n);
  Eigen::VectorXd z(proposal.mean.size());
  for (int j = 0; j < z.size(); ++j)
    z[j] = proposal.mean[j] + std::sqrt(proposal.var[j]) * c.normal(static_cast<std::uint64_t>(j));
  return z;
}

inline double arrival_gap(const PfrStream& s, std::uint64_t n) {
  return rng::Counter(s.seed, rng::Domain::kPfrWeight, s.stream, s.step, n).exponential(0);
}

// sup_z log target(z)/proposal(z); finite exactly when every target
// coordinate is strictly narrower than the proposal's.
inline double sup_log_ratio(const DiagGaussian& target, const DiagGaussian& proposal) {
  double acc = 0.0;
  for (int j = 0; j < target.mean.size(); ++j) {
    const double vt = target.var[j], vp = proposal.var[j];
    const double dm = target.mean[j] - proposal.mean[j];
    if (vt < vp) {
      acc += 0.5 * std::log(vp / vt) + dm * dm / (2.0 * (vp - vt));
    } else if (vt == vp && dm == 0.0) {
      continue;
    } else {
      return std::numeric_limits<double>::infinity();
    }
  }
  return acc;
}

inline std::uint64_t default_cap(double kl_nats) {
  const double kl_bits = kl_nats / std::numbers::ln2;
  const double raw = std::ceil(std::exp2(std::min(kl_bits, 20.0) + 8.0));
  return static_cast<std::uint64_t>(std::min(raw, std::exp2(20)));
}

}  // namespace detail

// Select the candidate minimizing S_n * proposal(z_n)/target(z_n) over the
// shared stream. With a finite density-ratio bound the scan stops once no
// later arrival can win (result exact); otherwise it runs to the cap and the
// transcript is flagged approximate.
inline PfrTranscript pfr_select(const DiagGaussian& target, const DiagGaussian& proposal,
                                const PfrStream& stream, std::uint64_t n_max = 0) {
  if (target.mean.size() != proposal.mean.size())
    throw std::invalid_argument("pfr_select: law dimension mismatch");
  const double kl = kl_diag(target, proposal);
  if (n_max == 0) n_max = detail::default_cap(kl);
  const double sup_log = detail::sup_log_ratio(target, proposal);

  double arrivals = 0.0;
  double best_log_score = std::numeric_limits<double>::infinity();
  std::uint64_t best = 0, examined = 0;
  bool certified = false;
  for (std::uint64_t n = 1; n <= n_max; ++n) {
    arrivals += detail::arrival_gap(stream, n);
    const Eigen::VectorXd z = detail::candidate(proposal, stream, n);
    const double log_score =
        std::log(arrivals) + proposal.log_density(z) - target.log_density(z);
    examined = n;
    if (log_score < best_log_score) {
      best_log_score = log_score;
      best = n;
    }
    if (std::isfinite(sup_log) && std::log(arrivals) - sup_log > best_log_score) {
      certified = true;
      break;
    }
  }
  PfrTranscript out;
  out.index = best;
  out.kl_nats = kl;
  out.codelength_bits = zipf_codelength(best, kl);
  out.candidates_examined = examined;
  out.cap_hit = !certified;
  out.stream = stream;
  return out;
}

// Regenerate candidate #index from the shared stream; bit-identical to the
// encoder's choice.
inline Eigen::VectorXd pfr_reconstruct(std::uint64_t index, const DiagGaussian& proposal,
                                       const PfrStream& stream) {
  if (index < 1) throw std::invalid_argument("pfr_reconstruct: index must be >= 1");
  return detail::candidate(proposal, stream, index);
}

// Exact conditional p(z_k | z_{k+1}, x) of the forward process, 0 <= k < T.
// Isotropic, hence valid coordinates in any orthonormal basis. k = 0 pins the
// law to the source point (zero variance).
inline DiagGaussian forward_posterior(const Eigen::VectorXd& x, const Eigen::VectorXd& z_next,
                                      const NoiseSchedule& sched, int k) {
  if (k < 0 || k + 1 > sched.steps())
    throw std::out_of_range("forward_posterior: step index out of range");
  const double ab_k = sched.alpha_bar(k);
  const double ab_next = sched.alpha_bar(k + 1);
  const double beta = sched.beta(k + 1);
  const double alpha = sched.alpha(k + 1);
  DiagGaussian law;
  law.mean = (std::sqrt(alpha) * (1.0 - ab_k) * z_next + std::sqrt(ab_k) * beta * x) /
             (1.0 - ab_next);
  law.var = Eigen::VectorXd::Constant(x.size(), beta * (1.0 - ab_k) / (1.0 - ab_next));
  return law;
}

// Conditional law of Z_k given Z_{k+1} under the Gaussian source model,
// diagonal in the source eigenbasis: slope_l = cov_l / var(Z_{k+1})_l with
// cov_l = sqrt(alpha_{k+1}) var(Z_k)_l.
struct StepConditional {
  Eigen::VectorXd slope;
  Eigen::VectorXd offset;
  Eigen::VectorXd var;

  // z_next in eigenbasis coordinates.
  DiagGaussian at(const Eigen::VectorXd& z_next) const {
    DiagGaussian law;
    law.mean = offset + slope.cwiseProduct(z_next);
    law.var = var;
    return law;
  }
};

inline StepConditional model_step_marginal(const GaussianSource& source,
                                           const NoiseSchedule& sched, int k) {
  if (k < 0 || k + 1 > sched.steps())
    throw std::out_of_range("model_step_marginal: step index out of range");
  const int d = source.dim();
  const double ab_k = sched.alpha_bar(k);
  const double ab_next = sched.alpha_bar(k + 1);
  const double root_alpha = std::sqrt(sched.alpha(k + 1));
  const Eigen::VectorXd mu_e = source.eigvecs().transpose() * source.mean();
  StepConditional law;
  law.slope.resize(d);
  law.offset.resize(d);
  law.var.resize(d);
  for (int l = 0; l < d; ++l) {
    const double var_k = perturbed_eigenvalue(source.eigvals()[l], ab_k);
    const double var_next = perturbed_eigenvalue(source.eigvals()[l], ab_next);
    const double cov = root_alpha * var_k;
    law.slope[l] = cov / var_next;
    law.offset[l] = std::sqrt(ab_k) * mu_e[l] - law.slope[l] * std::sqrt(ab_next) * mu_e[l];
    law.var[l] = var_k - cov * cov / var_next;
  }
  return law;
}

struct ChainResult {
  std::vector<PfrTranscript> transcripts;  // steps T-1 down to target_t
  Eigen::VectorXd z_t;                     // original basis
  double total_bits = 0.0;
  double total_kl_nats = 0.0;
  int cap_hits = 0;
};

// Diagnostic dump: one line per step.
inline std::string dump_transcripts(const std::vector<PfrTranscript>& transcripts) {
  std::string out;
  char line[160];
  for (const PfrTranscript& tr : transcripts) {
    std::snprintf(line, sizeof(line),
                  "k=%llu index=%llu bits=%.17g kl_nats=%.17g cap_hit=%d\n",
                  static_cast<unsigned long long>(tr.stream.step),
                  static_cast<unsigned long long>(tr.index), tr.codelength_bits, tr.kl_nats,
                  tr.cap_hit ? 1 : 0);
    out += line;
  }
  return out;
}

namespace detail {
inline Eigen::VectorXd chain_init(int d, const StreamId& s) {
  rng::Counter c(s.seed, rng::Domain::kChainInit, s.stream, 0);
  Eigen::VectorXd z(d);
  for (int j = 0; j < d; ++j) z[j] = c.normal(static_cast<std::uint64_t>(j));
  return z;
}
}  // namespace detail

// Progressive encoder: shared z_T ~ N(0, I) (charged zero bits), then one PFR
// selection per step k = T-1, ..., target_t with target = forward posterior
// and proposal = source-model step conditional.
inline ChainResult chain_encode(const Eigen::VectorXd& x, int target_t,
                                const GaussianSource& source, const NoiseSchedule& sched,
                                const StreamId& stream, std::uint64_t n_max = 0) {
  if (target_t < 1 || target_t > sched.steps() - 1)
    throw std::out_of_range("chain_encode: target index out of range");
  const Eigen::VectorXd x_e = source.eigvecs().transpose() * x;
  Eigen::VectorXd z = detail::chain_init(source.dim(), stream);
  ChainResult out;
  out.transcripts.reserve(static_cast<std::size_t>(sched.steps() - target_t));
  for (int k = sched.steps() - 1; k >= target_t; --k) {
    const StepChannel ch = StepChannel::make(forward_posterior(x_e, z, sched, k),
                                             model_step_marginal(source, sched, k).at(z));
    const PfrStream ps{stream.seed, stream.stream, static_cast<std::uint64_t>(k)};
    PfrTranscript tr = pfr_select(ch.target, ch.proposal, ps, n_max);
    z = pfr_reconstruct(tr.index, ch.proposal, ps);
    out.total_bits += tr.codelength_bits;
    out.total_kl_nats += tr.kl_nats;
    out.cap_hits += tr.cap_hit ? 1 : 0;
    out.transcripts.push_back(std::move(tr));
  }
  out.z_t = source.eigvecs() * z;
  return out;
}

// Decoder: reproduces the encoder's z_t exactly from the transcripts and the
// shared stream.
inline Eigen::VectorXd chain_decode(const std::vector<PfrTranscript>& transcripts, int target_t,
                                    const GaussianSource& source, const NoiseSchedule& sched,
                                    const StreamId& stream) {
  if (target_t < 1 || target_t > sched.steps() - 1)
    throw std::out_of_range("chain_decode: target index out of range");
  if (static_cast<int>(transcripts.size()) != sched.steps() - target_t)
    throw std::invalid_argument("chain_decode: transcript/step count mismatch");
  Eigen::VectorXd z = detail::chain_init(source.dim(), stream);
  std::size_t i = 0;
  for (int k = sched.steps() - 1; k >= target_t; --k, ++i) {
    const DiagGaussian proposal = model_step_marginal(source, sched, k).at(z);
    const PfrStream ps{stream.seed, stream.stream, static_cast<std::uint64_t>(k)};
    z = pfr_reconstruct(transcripts[i].index, proposal, ps);
  }
  return source.eigvecs() * z;
}

}  // namespace rdpflow::rcc
