#pragma once

// Probability sources with exact samplers and closed-form score oracles:
// scalar/multivariate Gaussians plus a 1-D Gaussian-mixture stress source,
// and Gaussian geometry utilities (squared W2 distance, KL divergence).

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "rdpflow/rng.hpp"
#include "rdpflow/schedule.hpp"

namespace rdpflow {

// Identifies an independent sampling stream. `stream` is caller-chosen (e.g.
// a trial id range base); draws are addressed, never consumed.
struct StreamId {
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
};

class GaussianSource {
 public:
  GaussianSource(Eigen::VectorXd mean, Eigen::MatrixXd cov)
      : mean_(std::move(mean)), cov_(std::move(cov)) {
    const auto d = mean_.size();
    if (cov_.rows() != d || cov_.cols() != d)
      throw std::invalid_argument("GaussianSource: covariance shape mismatch");
    if (!cov_.isApprox(cov_.transpose(), 1e-12))
      throw std::invalid_argument("GaussianSource: covariance not symmetric");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov_);
    if (eig.info() != Eigen::Success)
      throw std::runtime_error("GaussianSource: eigendecomposition failed");
    eigvals_ = eig.eigenvalues();
    eigvecs_ = eig.eigenvectors();
    const double floor = 1e-12 * eigvals_.maxCoeff();
    if (eigvals_.minCoeff() <= std::max(floor, 0.0))
      throw std::invalid_argument("GaussianSource: covariance singular or not positive definite");
  }

  static GaussianSource scalar(double mu, double sigma2) {
    Eigen::VectorXd m(1);
    m << mu;
    Eigen::MatrixXd c(1, 1);
    c << sigma2;
    return GaussianSource(std::move(m), std::move(c));
  }

  int dim() const { return static_cast<int>(mean_.size()); }
  const Eigen::VectorXd& mean() const { return mean_; }
  const Eigen::MatrixXd& cov() const { return cov_; }
  const Eigen::MatrixXd& eigvecs() const { return eigvecs_; }
  const Eigen::VectorXd& eigvals() const { return eigvals_; }

  // One draw, addressed by (stream, trial).
  Eigen::VectorXd draw(const StreamId& s, std::uint64_t trial) const {
    rng::Counter c(s.seed, rng::Domain::kSourceSample, s.stream, trial);
    Eigen::VectorXd xi(dim());
    for (int j = 0; j < dim(); ++j) xi[j] = c.normal(static_cast<std::uint64_t>(j));
    return mean_ + eigvecs_ * (eigvals_.cwiseSqrt().asDiagonal() * xi);
  }

  double log_density(const Eigen::VectorXd& x) const {
    const Eigen::VectorXd y = eigvecs_.transpose() * (x - mean_);
    double q = 0.0, logdet = 0.0;
    for (int j = 0; j < dim(); ++j) {
      q += y[j] * y[j] / eigvals_[j];
      logdet += std::log(eigvals_[j]);
    }
    return -0.5 * (q + logdet + dim() * std::log(2.0 * std::numbers::pi));
  }

 private:
  Eigen::VectorXd mean_;
  Eigen::MatrixXd cov_;
  Eigen::VectorXd eigvals_;
  Eigen::MatrixXd eigvecs_;
};

// Finite 1-D Gaussian mixture.
class GmmSource {
 public:
  GmmSource(std::vector<double> weights, std::vector<double> means, std::vector<double> variances)
      : w_(std::move(weights)), mu_(std::move(means)), var_(std::move(variances)) {
    if (w_.empty() || w_.size() != mu_.size() || w_.size() != var_.size())
      throw std::invalid_argument("GmmSource: component arrays must be nonempty and equal length");
    double total = 0.0;
    for (std::size_t i = 0; i < w_.size(); ++i) {
      if (!(w_[i] > 0.0)) throw std::invalid_argument("GmmSource: weights must be positive");
      if (!(var_[i] > 0.0)) throw std::invalid_argument("GmmSource: variances must be positive");
      total += w_[i];
    }
    if (std::fabs(total - 1.0) > 1e-12)
      throw std::invalid_argument("GmmSource: weights must sum to 1");
    cum_.resize(w_.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < w_.size(); ++i) {
      acc += w_[i];
      cum_[i] = acc;
    }
    cum_.back() = 1.0;
  }

  int components() const { return static_cast<int>(w_.size()); }
  double weight(int i) const { return w_[static_cast<std::size_t>(i)]; }
  double mean(int i) const { return mu_[static_cast<std::size_t>(i)]; }
  double variance(int i) const { return var_[static_cast<std::size_t>(i)]; }

  double draw(const StreamId& s, std::uint64_t trial) const {
    rng::Counter c(s.seed, rng::Domain::kSourceSample, s.stream, trial);
    const double u = c.uniform(0);
    std::size_t i = 0;
    while (i + 1 < cum_.size() && u > cum_[i]) ++i;
    return mu_[i] + std::sqrt(var_[i]) * c.normal(1);
  }

  // Log density of the perturbed marginal sqrt(ab) X + sqrt(1-ab) N, with
  // ab = 1 recovering the source itself. Max-shifted to survive far tails.
  double log_density_perturbed(double z, double alpha_bar) const {
    const double root = std::sqrt(alpha_bar);
    double best = -std::numeric_limits<double>::infinity();
    std::vector<double> terms(w_.size());
    for (std::size_t i = 0; i < w_.size(); ++i) {
      const double v = alpha_bar * var_[i] + (1.0 - alpha_bar);
      const double r = z - root * mu_[i];
      terms[i] = std::log(w_[i]) - 0.5 * (r * r / v + std::log(2.0 * std::numbers::pi * v));
      best = std::max(best, terms[i]);
    }
    double acc = 0.0;
    for (double t : terms) acc += std::exp(t - best);
    return best + std::log(acc);
  }

  double log_density(double x) const { return log_density_perturbed(x, 1.0); }

 private:
  std::vector<double> w_, mu_, var_, cum_;
};

// Gaussian statistics of Z_t = sqrt(alpha_bar_t) X + sqrt(1-alpha_bar_t) N.
struct PerturbStats {
  int t = 0;
  Eigen::VectorXd mean;  // sqrt(alpha_bar_t) mu0
  Eigen::MatrixXd cov;   // alpha_bar_t Sigma0 + (1 - alpha_bar_t) I
};

inline PerturbStats perturb_stats(const GaussianSource& source, const NoiseSchedule& sched,
                                  int t) {
  if (t < 1 || t > sched.steps())
    throw std::out_of_range("perturb_stats: time index out of range");
  const double ab = sched.alpha_bar(t);
  PerturbStats out;
  out.t = t;
  out.mean = std::sqrt(ab) * source.mean();
  out.cov = ab * source.cov() +
            (1.0 - ab) * Eigen::MatrixXd::Identity(source.dim(), source.dim());
  return out;
}

// i.i.d. draws; deterministic given the stream id.
template <typename Source>
std::vector<decltype(std::declval<Source>().draw(StreamId{}, 0))> sample(const Source& source,
                                                                         std::int64_t n,
                                                                         const StreamId& s) {
  if (n < 1) throw std::invalid_argument("sample: count must be >= 1");
  std::vector<decltype(source.draw(s, 0))> out;
  out.reserve(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) out.push_back(source.draw(s, static_cast<std::uint64_t>(i)));
  return out;
}

// Exact score of the k-level perturbed marginal: Sigma_k^{-1} (mu_k - z).
// Oracles expose dim() and score(z, k); the Gaussian one also exposes the
// eigenbasis needed by the per-dimension ODE.
class ScoreOracle {
 public:
  virtual ~ScoreOracle() = default;
  virtual int dim() const = 0;
  virtual const NoiseSchedule& schedule() const = 0;
  virtual void score_into(const Eigen::VectorXd& z, int k, Eigen::VectorXd& out) const = 0;
  Eigen::VectorXd score(const Eigen::VectorXd& z, int k) const {
    Eigen::VectorXd g(dim());
    score_into(z, k, g);
    return g;
  }
  // Non-null when the oracle is an exact Gaussian against a schedule.
  virtual const GaussianSource* gaussian() const { return nullptr; }
};

class GaussianScoreOracle final : public ScoreOracle {
 public:
  GaussianScoreOracle(const GaussianSource& source, const NoiseSchedule& sched)
      : source_(source), sched_(sched) {}

  int dim() const override { return source_.dim(); }
  const GaussianSource* gaussian() const override { return &source_; }
  const NoiseSchedule& schedule() const override { return sched_; }

  void score_into(const Eigen::VectorXd& z, int k, Eigen::VectorXd& out) const override {
    const double ab = sched_.alpha_bar(check(k));
    const double root = std::sqrt(ab);
    if (dim() == 1) {
      const double var = perturbed_eigenvalue(source_.eigvals()[0], ab);
      out.resize(1);
      out[0] = (root * source_.mean()[0] - z[0]) / var;
      return;
    }
    Eigen::VectorXd y = source_.eigvecs().transpose() * (root * source_.mean() - z);
    for (int j = 0; j < dim(); ++j) y[j] /= perturbed_eigenvalue(source_.eigvals()[j], ab);
    out = source_.eigvecs() * y;
  }

  // Score of eigen-coordinate l at level k given rotated state value y_l.
  double eigen_score(double y, int k, int l) const {
    const double ab = sched_.alpha_bar(check(k));
    const double mu = std::sqrt(ab) * (source_.eigvecs().transpose() * source_.mean())[l];
    return (mu - y) / perturbed_eigenvalue(source_.eigvals()[l], ab);
  }

 private:
  int check(int k) const {
    if (k < 1 || k > sched_.steps()) throw std::out_of_range("score: time index out of range");
    return k;
  }
  const GaussianSource& source_;
  const NoiseSchedule& sched_;
};

class GmmScoreOracle final : public ScoreOracle {
 public:
  GmmScoreOracle(const GmmSource& source, const NoiseSchedule& sched)
      : source_(source), sched_(sched) {}

  int dim() const override { return 1; }
  const NoiseSchedule& schedule() const override { return sched_; }

  void score_into(const Eigen::VectorXd& z, int k, Eigen::VectorXd& out) const override {
    if (k < 1 || k > sched_.steps()) throw std::out_of_range("score: time index out of range");
    const double ab = sched_.alpha_bar(k);
    const double root = std::sqrt(ab);
    // Responsibility-weighted component scores, log-space with max shift.
    const int m = source_.components();
    double best = -std::numeric_limits<double>::infinity();
    std::vector<double> logp(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i) {
      const double v = ab * source_.variance(i) + (1.0 - ab);
      const double r = z[0] - root * source_.mean(i);
      logp[static_cast<std::size_t>(i)] =
          std::log(source_.weight(i)) - 0.5 * (r * r / v + std::log(v));
      best = std::max(best, logp[static_cast<std::size_t>(i)]);
    }
    double norm = 0.0, acc = 0.0;
    for (int i = 0; i < m; ++i) {
      const double resp = std::exp(logp[static_cast<std::size_t>(i)] - best);
      const double v = ab * source_.variance(i) + (1.0 - ab);
      acc += resp * (root * source_.mean(i) - z[0]) / v;
      norm += resp;
    }
    out.resize(1);
    out[0] = acc / norm;
  }

 private:
  const GmmSource& source_;
  const NoiseSchedule& sched_;
};

namespace detail {
// Both covariances diagonalized in the basis of `a`; requires commuting
// covariances (checked at 1e-8 on the commutator).
inline void codiagonalize(const GaussianSource& a, const GaussianSource& b,
                          Eigen::VectorXd& la, Eigen::VectorXd& lb) {
  const Eigen::MatrixXd comm = a.cov() * b.cov() - b.cov() * a.cov();
  if (comm.cwiseAbs().maxCoeff() > 1e-8)
    throw std::invalid_argument("w2_gaussian: covariances do not commute (no shared eigenbasis)");
  la = a.eigvals();
  lb = (a.eigvecs().transpose() * b.cov() * a.eigvecs()).diagonal();
}
}  // namespace detail

// Squared Wasserstein-2 distance between co-diagonalizable Gaussians:
// ||mu_a - mu_b||^2 + sum_l (sqrt(la_l) - sqrt(lb_l))^2.
inline double w2_gaussian(const GaussianSource& a, const GaussianSource& b) {
  if (a.dim() != b.dim()) throw std::invalid_argument("w2_gaussian: dimension mismatch");
  Eigen::VectorXd la, lb;
  detail::codiagonalize(a, b, la, lb);
  double out = (a.mean() - b.mean()).squaredNorm();
  for (int j = 0; j < a.dim(); ++j) {
    const double r = std::sqrt(la[j]) - std::sqrt(std::max(lb[j], 0.0));
    out += r * r;
  }
  return out;
}

// KL(a || b) in nats.
inline double kl_gaussian(const GaussianSource& a, const GaussianSource& b) {
  if (a.dim() != b.dim()) throw std::invalid_argument("kl_gaussian: dimension mismatch");
  const int d = a.dim();
  Eigen::LLT<Eigen::MatrixXd> llt(b.cov());
  if (llt.info() != Eigen::Success)
    throw std::invalid_argument("kl_gaussian: singular covariance");
  const Eigen::MatrixXd ib = llt.solve(Eigen::MatrixXd::Identity(d, d));
  const Eigen::VectorXd dm = b.mean() - a.mean();
  double logdet_a = 0.0, logdet_b = 0.0;
  for (int j = 0; j < d; ++j) logdet_a += std::log(a.eigvals()[j]);
  for (int j = 0; j < d; ++j) logdet_b += std::log(b.eigvals()[j]);
  return 0.5 * ((ib * a.cov()).trace() + dm.dot(ib * dm) - d + logdet_b - logdet_a);
}

// Exact empirical optimal coupling in 1-D: mean squared gap of order
// statistics.
inline double empirical_w2_1d(std::vector<double> xs, std::vector<double> ys) {
  if (xs.size() != ys.size() || xs.empty())
    throw std::invalid_argument("empirical_w2_1d: need equal nonzero sample counts");
  std::sort(xs.begin(), xs.end());
  std::sort(ys.begin(), ys.end());
  double acc = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double r = xs[i] - ys[i];
    acc += r * r;
  }
  return acc / static_cast<double>(xs.size());
}

}  // namespace rdpflow
