#pragma once

// Monte Carlo experiment engine: runs end-to-end compress/decode trials,
// estimates empirical (rate, MSE, squared-W2) triplets with jackknife errors,
// and pairs them with the closed-form predictions.
//
// Determinism: every trial draws addressed variates keyed by (seed, trial)
// and, for the observation noise, by the level t (so one encoder ensemble at
// level t is decoded under every rho of the sweep). Trials are accumulated
// into 50 contiguous batches; each batch is summed sequentially in trial
// order by exactly one worker and batches are merged by a fixed pairwise
// tree, so results are bit-identical for any thread count.

#include <Eigen/Dense>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <thread>
#include <variant>
#include <vector>

#include "rdpflow/rcc.hpp"
#include "rdpflow/rng.hpp"
#include "rdpflow/schedule.hpp"
#include "rdpflow/sources.hpp"
#include "rdpflow/ssode.hpp"
#include "rdpflow/stats.hpp"
#include "rdpflow/theory.hpp"

namespace rdpflow::mc {

enum class RateMode { kKl, kZipf };
enum class DecodeMode { kClosedFormZt, kFullChain };
enum class SourceKind { kScalarGaussian, kMultivariateGaussian, kGmm1d };

struct SourceSpec {
  SourceKind kind = SourceKind::kScalarGaussian;
  double mu = 0.0;      // scalar Gaussian
  double sigma2 = 1.0;  // scalar Gaussian
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  std::vector<double> weights, means, variances;  // gmm-1d
};

struct ScheduleSpec {
  int steps = 1000;
  double beta_min = 1e-4;
  double beta_max = 0.02;
};

struct ExperimentConfig {
  SourceSpec source;
  ScheduleSpec schedule;
  std::vector<int> t_grid;
  std::vector<double> rho_grid;
  std::int64_t trials = 100000;
  RateMode rate_mode = RateMode::kKl;
  DecodeMode decode_mode = DecodeMode::kClosedFormZt;
  std::uint64_t seed = 1;
  int threads = 0;          // 0: hardware concurrency
  std::uint64_t pfr_cap = 0;  // 0: per-step default
};

struct SweepRow {
  int t = 0;
  double rho = 0.0;
  double alpha_bar_t = 0.0;
  double rate_bits_emp = 0.0, rate_bits_se = 0.0, rate_bits_theory = 0.0;
  double mse_emp = 0.0, mse_se = 0.0, mse_theory = 0.0;
  double w2sq_emp = 0.0, w2sq_se = 0.0, w2sq_theory = 0.0;
  RateMode rate_mode = RateMode::kKl;
  DecodeMode decode_mode = DecodeMode::kClosedFormZt;
  std::int64_t trials = 0;
  int cap_hits = 0;
};

struct SweepResult {
  std::vector<SweepRow> rows;
};

struct Estimate {
  double value = 0.0;
  double se = 0.0;
};

// Mean squared Euclidean error with a jackknife standard error.
inline Estimate mse(const std::vector<Eigen::VectorXd>& xs,
                    const std::vector<Eigen::VectorXd>& xhats) {
  if (xs.size() != xhats.size() || xs.empty())
    throw std::invalid_argument("mse: need equal nonzero sample counts");
  const std::size_t n = xs.size();
  const std::size_t nbatches = std::min<std::size_t>(50, n);
  std::vector<double> batch_sum(nbatches, 0.0);
  std::vector<double> batch_count(nbatches, 0.0);
  for (std::size_t b = 0; b < nbatches; ++b) {
    const std::size_t lo = n * b / nbatches, hi = n * (b + 1) / nbatches;
    for (std::size_t i = lo; i < hi; ++i) batch_sum[b] += (xs[i] - xhats[i]).squaredNorm();
    batch_count[b] = static_cast<double>(hi - lo);
  }
  const double total = stats::pairwise_sum(batch_sum);
  Estimate out;
  out.value = total / static_cast<double>(n);
  std::vector<double> loo(nbatches);
  for (std::size_t b = 0; b < nbatches; ++b)
    loo[b] = (total - batch_sum[b]) / (static_cast<double>(n) - batch_count[b]);
  out.se = stats::jackknife_se(loo);
  return out;
}

namespace detail {

inline int resolve_threads(int requested) {
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

struct BatchAccum {
  double count = 0.0;
  double sq_err = 0.0;
  double bits = 0.0;
  double cap_hits = 0.0;
  Eigen::VectorXd sum_y;   // reconstruction, source eigenbasis
  Eigen::VectorXd sum_y2;  // squared coordinates
  std::vector<double> xs, xhats;  // kept only for the 1-D GMM source
};

template <typename PerTrial>
std::vector<BatchAccum> run_batches(std::int64_t trials, int dim, int threads, bool keep_samples,
                                    PerTrial&& per_trial) {
  const std::int64_t nbatches = std::min<std::int64_t>(50, trials);
  std::vector<BatchAccum> acc(static_cast<std::size_t>(nbatches));
  std::atomic<std::int64_t> next{0};
  auto work = [&] {
    for (;;) {
      const std::int64_t b = next.fetch_add(1);
      if (b >= nbatches) return;
      BatchAccum& slot = acc[static_cast<std::size_t>(b)];
      slot.sum_y = Eigen::VectorXd::Zero(dim);
      slot.sum_y2 = Eigen::VectorXd::Zero(dim);
      const std::int64_t lo = trials * b / nbatches, hi = trials * (b + 1) / nbatches;
      if (keep_samples) {
        slot.xs.reserve(static_cast<std::size_t>(hi - lo));
        slot.xhats.reserve(static_cast<std::size_t>(hi - lo));
      }
      for (std::int64_t i = lo; i < hi; ++i) per_trial(static_cast<std::uint64_t>(i), slot);
      slot.count = static_cast<double>(hi - lo);
    }
  };
  std::vector<std::thread> pool;
  const int nthreads = std::min<std::int64_t>(threads, nbatches);
  for (int w = 1; w < nthreads; ++w) pool.emplace_back(work);
  work();
  for (auto& th : pool) th.join();
  return acc;
}

struct Moments {
  double n = 0.0;
  double sq_err = 0.0;
  double bits = 0.0;
  double cap_hits = 0.0;
  Eigen::VectorXd sum_y, sum_y2;
};

inline Moments merge(const std::vector<BatchAccum>& acc, std::optional<std::size_t> skip) {
  const int dim = static_cast<int>(acc.front().sum_y.size());
  std::vector<double> counts, errs, bits, caps;
  std::vector<Eigen::VectorXd> ys, y2s;
  for (std::size_t b = 0; b < acc.size(); ++b) {
    if (skip && *skip == b) continue;
    counts.push_back(acc[b].count);
    errs.push_back(acc[b].sq_err);
    bits.push_back(acc[b].bits);
    caps.push_back(acc[b].cap_hits);
    ys.push_back(acc[b].sum_y);
    y2s.push_back(acc[b].sum_y2);
  }
  Moments m;
  m.n = stats::pairwise_sum(counts);
  m.sq_err = stats::pairwise_sum(errs);
  m.bits = stats::pairwise_sum(bits);
  m.cap_hits = stats::pairwise_sum(caps);
  m.sum_y = Eigen::VectorXd::Zero(dim);
  m.sum_y2 = Eigen::VectorXd::Zero(dim);
  std::vector<double> tmp(ys.size());
  for (int j = 0; j < dim; ++j) {
    for (std::size_t i = 0; i < ys.size(); ++i) tmp[i] = ys[i][j];
    m.sum_y[j] = stats::pairwise_sum(tmp);
    for (std::size_t i = 0; i < y2s.size(); ++i) tmp[i] = y2s[i][j];
    m.sum_y2[j] = stats::pairwise_sum(tmp);
  }
  return m;
}

// Moment-matched squared W2 against a Gaussian source: the reconstruction is
// fitted in the source eigenbasis (cross-covariances vanish there for the
// affine decoder), which keeps the fitted law co-diagonalizable.
inline double moment_matched_w2(const Moments& m, const GaussianSource& source) {
  const Eigen::VectorXd mu_e = source.eigvecs().transpose() * source.mean();
  double acc = 0.0;
  for (int j = 0; j < mu_e.size(); ++j) {
    const double mean = m.sum_y[j] / m.n;
    const double var = std::max(m.sum_y2[j] / m.n - mean * mean, 0.0);
    const double dm = mean - mu_e[j];
    const double ds = std::sqrt(var) - std::sqrt(source.eigvals()[j]);
    acc += dm * dm + ds * ds;
  }
  return acc;
}

}  // namespace detail

inline NoiseSchedule build_schedule(const ScheduleSpec& spec) {
  return NoiseSchedule::linear(spec.steps, spec.beta_min, spec.beta_max);
}

inline GaussianSource build_gaussian(const SourceSpec& spec) {
  switch (spec.kind) {
    case SourceKind::kScalarGaussian:
      return GaussianSource::scalar(spec.mu, spec.sigma2);
    case SourceKind::kMultivariateGaussian:
      return GaussianSource(spec.mean, spec.cov);
    default:
      throw std::invalid_argument("source spec is not Gaussian");
  }
}

// One sweep cell: n trials of sample -> observe (exact z_t or coded chain)
// -> decode -> accumulate.
inline SweepRow run_point(const ExperimentConfig& cfg, int t, double rho) {
  const NoiseSchedule sched = build_schedule(cfg.schedule);
  if (t < 1 || t > sched.steps()) throw std::out_of_range("run_point: t outside schedule");
  if (cfg.trials < 1) throw std::invalid_argument("run_point: trials must be >= 1");
  const bool gmm = cfg.source.kind == SourceKind::kGmm1d;
  if (gmm && cfg.decode_mode == DecodeMode::kFullChain)
    throw std::invalid_argument("run_point: full-chain mode needs a Gaussian source model");
  if (cfg.decode_mode == DecodeMode::kFullChain && t > sched.steps() - 1)
    throw std::out_of_range("run_point: full-chain mode needs t <= T-1");
  if (cfg.rate_mode == RateMode::kZipf && cfg.decode_mode != DecodeMode::kFullChain)
    throw std::invalid_argument("run_point: zipf rate accounting needs full-chain mode");

  const double ab = sched.alpha_bar(t);
  const double root_ab = std::sqrt(ab);
  const double root_rem = std::sqrt(1.0 - ab);
  const int threads = detail::resolve_threads(cfg.threads);

  SweepRow row;
  row.t = t;
  row.rho = rho;
  row.alpha_bar_t = ab;
  row.rate_mode = cfg.rate_mode;
  row.decode_mode = cfg.decode_mode;
  row.trials = cfg.trials;

  std::vector<detail::BatchAccum> acc;
  std::optional<GaussianSource> gauss;
  std::optional<GmmSource> mixture;

  if (!gmm) {
    gauss.emplace(build_gaussian(cfg.source));
    const GaussianSource& src = *gauss;
    const GaussianScoreOracle oracle(src, sched);
    const int d = src.dim();
    acc = detail::run_batches(
        cfg.trials, d, threads, false, [&](std::uint64_t trial, detail::BatchAccum& slot) {
          const Eigen::VectorXd x = src.draw({cfg.seed, 0}, trial);
          Eigen::VectorXd z(d);
          if (cfg.decode_mode == DecodeMode::kClosedFormZt) {
            rng::Counter noise(cfg.seed, rng::Domain::kForwardNoise,
                               static_cast<std::uint64_t>(t), trial);
            for (int j = 0; j < d; ++j)
              z[j] = root_ab * x[j] + root_rem * noise.normal(static_cast<std::uint64_t>(j));
          } else {
            const rcc::ChainResult chain =
                rcc::chain_encode(x, t, src, sched, {cfg.seed, trial}, cfg.pfr_cap);
            z = chain.z_t;
            slot.bits += chain.total_bits;
            slot.cap_hits += chain.cap_hits;
          }
          const Eigen::VectorXd xhat = ode::decode(z, t, rho, sched, oracle);
          slot.sq_err += (x - xhat).squaredNorm();
          const Eigen::VectorXd y = src.eigvecs().transpose() * xhat;
          for (int j = 0; j < d; ++j) {
            slot.sum_y[j] += y[j];
            slot.sum_y2[j] += y[j] * y[j];
          }
        });
  } else {
    mixture.emplace(cfg.source.weights, cfg.source.means, cfg.source.variances);
    const GmmSource& src = *mixture;
    const GmmScoreOracle oracle(src, sched);
    acc = detail::run_batches(
        cfg.trials, 1, threads, true, [&](std::uint64_t trial, detail::BatchAccum& slot) {
          const double x = src.draw({cfg.seed, 0}, trial);
          rng::Counter noise(cfg.seed, rng::Domain::kForwardNoise, static_cast<std::uint64_t>(t),
                             trial);
          Eigen::VectorXd z(1);
          z[0] = root_ab * x + root_rem * noise.normal(0);
          const Eigen::VectorXd xhat = ode::decode(z, t, rho, sched, oracle);
          const double r = x - xhat[0];
          slot.sq_err += r * r;
          slot.sum_y[0] += xhat[0];
          slot.sum_y2[0] += xhat[0] * xhat[0];
          slot.xs.push_back(x);
          slot.xhats.push_back(xhat[0]);
        });
  }

  const detail::Moments all = detail::merge(acc, std::nullopt);
  row.mse_emp = all.sq_err / all.n;
  row.cap_hits = static_cast<int>(all.cap_hits);

  std::vector<double> loo_mse(acc.size()), loo_w2(acc.size()), loo_bits(acc.size());
  for (std::size_t b = 0; b < acc.size(); ++b) {
    const detail::Moments rest = detail::merge(acc, b);
    loo_mse[b] = rest.sq_err / rest.n;
    loo_bits[b] = rest.bits / rest.n;
    if (!gmm) loo_w2[b] = detail::moment_matched_w2(rest, *gauss);
  }
  row.mse_se = stats::jackknife_se(loo_mse);

  const double nan = std::numeric_limits<double>::quiet_NaN();
  if (!gmm) {
    row.w2sq_emp = detail::moment_matched_w2(all, *gauss);
    row.w2sq_se = stats::jackknife_se(loo_w2);
    const theory::DpPoint pred =
        theory::achievable_dp_gaussian(gauss->eigvals(), sched, t, rho);
    row.mse_theory = pred.distortion;
    row.w2sq_theory = pred.perception;
    row.rate_bits_theory = theory::bits(theory::mutual_info(gauss->eigvals(), ab));
  } else {
    std::vector<double> xs, xhats;
    for (const auto& slot : acc) {
      xs.insert(xs.end(), slot.xs.begin(), slot.xs.end());
      xhats.insert(xhats.end(), slot.xhats.begin(), slot.xhats.end());
    }
    row.w2sq_emp = empirical_w2_1d(xs, xhats);
    if (acc.size() >= 2) {
      std::vector<double> loo(acc.size());
      for (std::size_t b = 0; b < acc.size(); ++b) {
        std::vector<double> rx, rh;
        for (std::size_t c = 0; c < acc.size(); ++c) {
          if (c == b) continue;
          rx.insert(rx.end(), acc[c].xs.begin(), acc[c].xs.end());
          rh.insert(rh.end(), acc[c].xhats.begin(), acc[c].xhats.end());
        }
        loo[b] = empirical_w2_1d(rx, rh);
      }
      row.w2sq_se = stats::jackknife_se(loo);
    }
    row.mse_theory = nan;
    row.w2sq_theory = nan;
    row.rate_bits_theory = nan;
  }

  if (cfg.rate_mode == RateMode::kKl) {
    row.rate_bits_emp = row.rate_bits_theory;
    row.rate_bits_se = 0.0;
  } else {
    row.rate_bits_emp = all.bits / all.n;
    row.rate_bits_se = stats::jackknife_se(loo_bits);
  }
  return row;
}

// Map run_point over the (t, rho) grid; deterministic given the seed.
inline SweepResult run_sweep(const ExperimentConfig& cfg) {
  if (cfg.t_grid.empty() || cfg.rho_grid.empty())
    throw std::invalid_argument("run_sweep: empty grid");
  SweepResult out;
  out.rows.reserve(cfg.t_grid.size() * cfg.rho_grid.size());
  for (int t : cfg.t_grid)
    for (double rho : cfg.rho_grid) out.rows.push_back(run_point(cfg, t, rho));
  return out;
}

}  // namespace rdpflow::mc
