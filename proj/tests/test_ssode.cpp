#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "oracles.hpp"
#include "rdpflow/ssode.hpp"

using namespace rdpflow;

namespace {

NoiseSchedule anchored(int steps) {
  // Same continuous-time ramp at every resolution: beta_k = c(k/T)/T with
  // c linear from 0.1 to 20 (the T = 1000 default).
  return NoiseSchedule::linear(steps, 0.1 / steps, 20.0 / steps);
}

Eigen::VectorXd v1(double x) {
  Eigen::VectorXd v(1);
  v << x;
  return v;
}

}  // namespace

TEST_CASE("single reverse step") {
  SECTION("zero gradient, small beta is near identity") {
    const auto out = ode::ode_step(v1(1.0), v1(0.0), 1e-12, 0.5);
    CHECK_THAT(out[0], Catch::Matchers::WithinAbs(1.0, 1e-11));
  }
  SECTION("arithmetic at beta = 0.19") {
    CHECK_THAT(ode::ode_step(v1(1.0), v1(-1.0), 0.19, 1.0)[0],
               Catch::Matchers::WithinRel((1.0 - 0.095) / 0.9, 1e-14));
    CHECK_THAT(ode::ode_step(v1(1.0), v1(-1.0), 0.19, 0.0)[0],
               Catch::Matchers::WithinRel(0.9, 1e-14));
  }
  SECTION("bad arguments") {
    CHECK_THROWS_AS(ode::ode_step(v1(0.0), v1(0.0), 0.0, 0.5), std::invalid_argument);
    CHECK_THROWS_AS(ode::ode_step(v1(0.0), v1(0.0), 0.1, -0.1), std::invalid_argument);
    CHECK_THROWS_AS(ode::ode_step(v1(0.0), v1(0.0), 0.1, 1.1), std::invalid_argument);
  }
}

TEST_CASE("decode reaches the Tweedie mean at rho = 0") {
  const auto sched = NoiseSchedule::linear(4000, 1e-4, 0.02);
  const auto src = GaussianSource::scalar(0.0, 1.0);
  const GaussianScoreOracle oracle(src, sched);
  const int t = sched.nearest_step(0.25);
  for (double z : {-1.3, 0.4, 2.0}) {
    // Reference slope 0.5 at the ideal alpha_bar = 0.25; the grid lands
    // within O(beta_t) of the target.
    CHECK_THAT(ode::decode(v1(z), t, 0.0, sched, oracle)[0],
               Catch::Matchers::WithinAbs(0.5 * z, 2e-3 * std::max(1.0, std::fabs(z))));
  }
}

TEST_CASE("mean input decodes to the source mean for every rho") {
  const auto sched = NoiseSchedule::linear(300, 1e-3, 0.03);
  const auto src = GaussianSource::scalar(0.7, 2.0);
  const GaussianScoreOracle oracle(src, sched);
  for (int t : {1, 60, 300}) {
    const double mu_t = std::sqrt(sched.alpha_bar(t)) * 0.7;
    for (double rho : {0.0, 0.3, 1.0}) {
      CHECK_THAT(ode::decode(v1(mu_t), t, rho, sched, oracle)[0],
                 Catch::Matchers::WithinAbs(0.7, 1e-9));
    }
  }
}

TEST_CASE("rho = 1 slope reproduces the source variance") {
  const auto sched = NoiseSchedule::linear(1000, 1e-4, 0.02);
  const auto src = GaussianSource::scalar(0.0, 1.0);
  const GaussianScoreOracle oracle(src, sched);
  const int t = sched.nearest_step(0.25);
  const double sigma_t = std::sqrt(perturbed_eigenvalue(1.0, sched.alpha_bar(t)));
  const double slope =
      ode::decode(v1(1.0), t, 1.0, sched, oracle)[0] - ode::decode(v1(0.0), t, 1.0, sched, oracle)[0];
  // Marginal variance of the reconstruction is slope^2 sigma_t^2, which must
  // recover sigma0^2 = 1 up to the O(sum beta^2) closed-form gap.
  CHECK_THAT(slope * slope * sigma_t * sigma_t, Catch::Matchers::WithinAbs(1.0, 2e-3));
}

TEST_CASE("exact coefficients: Tweedie endpoint and identity") {
  const auto sched = NoiseSchedule::linear(200, 1e-3, 0.05);
  Eigen::VectorXd mu(2);
  mu << 0.3, -0.2;
  Eigen::MatrixXd cov(2, 2);
  cov << 2.0, 0.6, 0.6, 0.9;
  const GaussianSource src(mu, cov);
  for (int t : {1, 37, 200}) {
    const double ab = sched.alpha_bar(t);
    const Eigen::MatrixXd sigma_t =
        ab * cov + (1.0 - ab) * Eigen::MatrixXd::Identity(2, 2);
    SECTION("rho = 0 at t=" + std::to_string(t)) {
      const auto coeffs = ode::recon_coeffs_exact(src, sched, t, 0.0);
      const Eigen::MatrixXd a_want = std::sqrt(ab) * cov * sigma_t.inverse();
      const Eigen::MatrixXd b_want = (1.0 - ab) * sigma_t.inverse();
      CHECK((coeffs.A - a_want).cwiseAbs().maxCoeff() <= 1e-12);
      CHECK((coeffs.B - b_want).cwiseAbs().maxCoeff() <= 1e-12);
    }
    for (double rho : {0.0, 0.25, 0.6, 1.0}) {
      const auto coeffs = ode::recon_coeffs_exact(src, sched, t, rho);
      const Eigen::MatrixXd resid =
          coeffs.A * std::sqrt(ab) + coeffs.B - Eigen::MatrixXd::Identity(2, 2);
      CHECK(resid.cwiseAbs().maxCoeff() <= 1e-8);
    }
  }
}

TEST_CASE("exact coefficients at t = 1") {
  const auto sched = NoiseSchedule::linear(1, 0.3, 0.3);
  const auto src = GaussianSource::scalar(0.0, 1.0);
  const double rho = 0.4;
  const auto coeffs = ode::recon_coeffs_exact(src, sched, 1, rho);
  const double s1 = perturbed_eigenvalue(1.0, sched.alpha_bar(1));
  CHECK_THAT(coeffs.a(), Catch::Matchers::WithinRel(
                             std::sqrt(0.7) * (1.0 + 0.5 * rho * 0.3 / 0.7) / s1, 1e-13));
  CHECK_THAT(coeffs.b(), Catch::Matchers::WithinRel(0.5 * (2.0 - rho) * 0.3 / s1, 1e-13));
}

TEST_CASE("alternative coefficients: endpoints") {
  const auto sched = NoiseSchedule::linear(400, 1e-3, 0.02);
  const auto src = GaussianSource::scalar(0.0, 1.0);
  const int t = sched.nearest_step(0.3);
  SECTION("rho = 1 collapses to sigma0/sigma_t") {
    const auto alt = ode::recon_coeffs_alt(src, sched, t, 1.0);
    const double sigma_t = std::sqrt(perturbed_eigenvalue(1.0, sched.alpha_bar(t)));
    CHECK_THAT(alt.a(), Catch::Matchers::WithinRel(1.0 / sigma_t, 1e-12));
    CHECK_THAT(alt.a() * std::sqrt(sched.alpha_bar(t)) + alt.b(),
               Catch::Matchers::WithinAbs(1.0, 1e-12));
  }
  SECTION("rho = 0 telescopes to the exact map") {
    const auto alt = ode::recon_coeffs_alt(src, sched, t, 0.0);
    const auto exact = ode::recon_coeffs_exact(src, sched, t, 0.0);
    CHECK_THAT(alt.a(), Catch::Matchers::WithinRel(exact.a(), 1e-12));
  }
}

TEST_CASE("alternative coefficients converge at first order") {
  // Intermediate rho: the gap to the exact product halves per grid doubling.
  const auto src = GaussianSource::scalar(0.0, 1.0);
  std::vector<double> gaps;
  for (int steps : {250, 500, 1000}) {
    const auto sched = anchored(steps);
    const int t = sched.nearest_step(0.25);
    const auto exact = ode::recon_coeffs_exact(src, sched, t, 0.5);
    const auto alt = ode::recon_coeffs_alt(src, sched, t, 0.5);
    gaps.push_back(std::fabs(alt.a() - exact.a()));
  }
  CHECK(gaps[0] / gaps[1] > 1.5);
  CHECK(gaps[0] / gaps[1] < 2.7);
  CHECK(gaps[1] / gaps[2] > 1.5);
  CHECK(gaps[1] / gaps[2] < 2.7);
}

TEST_CASE("reconstruction marginal") {
  const auto sched = NoiseSchedule::linear(1000, 1e-4, 0.02);
  Eigen::VectorXd mu(2);
  mu << 0.5, -1.0;
  Eigen::MatrixXd cov(2, 2);
  cov << 1.3, 0.4, 0.4, 0.8;
  const GaussianSource src(mu, cov);
  const int t = sched.nearest_step(0.25);

  SECTION("rho = 1 returns the source law") {
    const auto law = ode::marginal_of_recon(src, sched, t, 1.0);
    CHECK((law.mean() - mu).cwiseAbs().maxCoeff() == 0.0);
    CHECK((law.cov() - cov).cwiseAbs().maxCoeff() <= 1e-12);
  }
  SECTION("rho = 0 scalar variance is alpha_bar") {
    const auto unit = GaussianSource::scalar(0.0, 1.0);
    const auto law = ode::marginal_of_recon(unit, sched, t, 0.0);
    CHECK_THAT(law.cov()(0, 0), Catch::Matchers::WithinRel(sched.alpha_bar(t), 1e-10));
  }
  SECTION("rho = 0.5 variance matches Monte Carlo decodes") {
    const auto unit = GaussianSource::scalar(0.0, 1.0);
    const GaussianScoreOracle oracle(unit, sched);
    const auto law = ode::marginal_of_recon(unit, sched, t, 0.5);
    // decode is affine, so the output law follows from two probes.
    const double sigma_t = std::sqrt(perturbed_eigenvalue(1.0, sched.alpha_bar(t)));
    const int n = 100000;
    double sum = 0.0, sum2 = 0.0;
    rng::Counter noise(123, rng::Domain::kTest);
    const double a0 = ode::decode(v1(0.0), t, 0.5, sched, oracle)[0];
    const double a1 = ode::decode(v1(1.0), t, 0.5, sched, oracle)[0] - a0;
    for (int i = 0; i < n; ++i) {
      const double z = sigma_t * noise.normal(static_cast<std::uint64_t>(i));
      const double xhat = a0 + a1 * z;
      sum += xhat;
      sum2 += xhat * xhat;
    }
    const double var = sum2 / n - (sum / n) * (sum / n);
    CHECK_THAT(var, Catch::Matchers::WithinRel(law.cov()(0, 0), 0.02));
  }
}

TEST_CASE("contraction factor") {
  const auto sched = NoiseSchedule::linear(1000, 1e-4, 0.02);
  const int t = sched.nearest_step(0.25);
  const double ab = sched.alpha_bar(t);

  CHECK(ode::contraction_factor(2.0, sched, t, 1.0) == 1.0);
  CHECK_THAT(ode::contraction_factor(1.0, sched, t, 0.0),
             Catch::Matchers::WithinRel(std::sqrt(ab), 1e-12));
  const double lam = 3.0;
  CHECK_THAT(ode::contraction_factor(lam, sched, t, 0.0),
             Catch::Matchers::WithinRel(
                 std::sqrt(ab * lam) / std::sqrt(perturbed_eigenvalue(lam, ab)), 1e-12));

  SECTION("monotone in rho and tied to the marginal covariance") {
    const auto src = GaussianSource::scalar(0.0, lam);
    double prev = 0.0;
    for (int i = 0; i <= 20; ++i) {
      const double rho = i / 20.0;
      const double f = ode::contraction_factor(lam, sched, t, rho);
      CHECK(f >= prev);
      prev = f;
      const auto law = ode::marginal_of_recon(src, sched, t, rho);
      CHECK_THAT(f * f * lam, Catch::Matchers::WithinRel(law.cov()(0, 0), 1e-11));
    }
  }
}

TEST_CASE("decode is affine in z_t") {
  const auto sched = NoiseSchedule::linear(500, 2e-4, 0.04);
  Eigen::VectorXd mu(2);
  mu << 0.1, 0.2;
  Eigen::MatrixXd cov(2, 2);
  cov << 1.5, 0.3, 0.3, 0.6;
  const GaussianSource src(mu, cov);
  const GaussianScoreOracle oracle(src, sched);
  const int t = sched.nearest_step(0.2);
  rng::Counter c(71, rng::Domain::kTest);
  for (int trial = 0; trial < 10; ++trial) {
    Eigen::VectorXd u(2), v(2);
    for (int j = 0; j < 2; ++j) {
      u[j] = c.normal(4 * trial + j);
      v[j] = c.normal(4 * trial + 2 + j);
    }
    const Eigen::VectorXd base = ode::decode(Eigen::VectorXd::Zero(2), t, 0.35, sched, oracle);
    const Eigen::VectorXd du = ode::decode(u, t, 0.35, sched, oracle) - base;
    const Eigen::VectorXd dv = ode::decode(v, t, 0.35, sched, oracle) - base;
    const Eigen::VectorXd dsum = ode::decode(u + v, t, 0.35, sched, oracle) - base;
    CHECK((dsum - du - dv).cwiseAbs().maxCoeff() <=
          1e-9 * std::max(1.0, dsum.cwiseAbs().maxCoeff()));
  }
}

TEST_CASE("decode agrees with the exact affine map") {
  const auto sched = NoiseSchedule::linear(1000, 1e-4, 0.02);
  for (double sigma0 : {0.5, 1.0, 2.0}) {
    const auto src = GaussianSource::scalar(0.4, sigma0 * sigma0);
    const GaussianScoreOracle oracle(src, sched);
    for (double target : {0.1, 0.5}) {
      const int t = sched.nearest_step(target);
      for (double rho : {0.0, 0.5, 1.0}) {
        const auto coeffs = ode::recon_coeffs_exact(src, sched, t, rho);
        const double intercept = ode::decode(v1(0.0), t, rho, sched, oracle)[0];
        const double slope = ode::decode(v1(1.0), t, rho, sched, oracle)[0] - intercept;
        CHECK_THAT(slope, Catch::Matchers::WithinAbs(coeffs.a(), 1e-9));
        CHECK_THAT(intercept, Catch::Matchers::WithinAbs(coeffs.b() * 0.4, 1e-9));
      }
    }
  }
}

TEST_CASE("per-dimension decode splits into scalar decodes") {
  const auto sched = NoiseSchedule::linear(300, 1e-3, 0.03);
  Eigen::VectorXd mu(2);
  mu << 0.2, -0.4;
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(2, 2);
  cov(0, 0) = 2.0;
  cov(1, 1) = 0.5;
  const GaussianSource src(mu, cov);
  const GaussianScoreOracle oracle(src, sched);
  const int t = sched.nearest_step(0.3);
  Eigen::VectorXd rho(2);
  rho << 0.2, 0.9;
  Eigen::VectorXd z(2);
  z << 1.1, -0.7;
  const Eigen::VectorXd got = ode::decode(z, t, rho, sched, oracle);

  const Eigen::VectorXd mu_e = src.eigvecs().transpose() * mu;
  const Eigen::VectorXd z_e = src.eigvecs().transpose() * z;
  Eigen::VectorXd yhat(2);
  for (int l = 0; l < 2; ++l) {
    const auto scalar_src = GaussianSource::scalar(mu_e[l], src.eigvals()[l]);
    const GaussianScoreOracle scalar_oracle(scalar_src, sched);
    yhat[l] = ode::decode(v1(z_e[l]), t, rho[l], sched, scalar_oracle)[0];
  }
  const Eigen::VectorXd want = src.eigvecs() * yhat;
  CHECK((got - want).cwiseAbs().maxCoeff() <= 1e-12);

  SECTION("per-dimension mode needs a Gaussian oracle") {
    const GmmSource gmm({0.5, 0.5}, {-1.0, 1.0}, {1.0, 1.0});
    const GmmScoreOracle gmm_oracle(gmm, sched);
    CHECK_THROWS_AS(ode::decode(v1(0.0), t, Eigen::VectorXd::Ones(1), sched, gmm_oracle),
                    std::invalid_argument);
  }
  SECTION("rho vector length must match") {
    CHECK_THROWS_AS(ode::decode(z, t, Eigen::VectorXd::Ones(3), sched, oracle),
                    std::invalid_argument);
  }
}

TEST_CASE("oracle must be bound to the schedule it is used with") {
  const auto sched = NoiseSchedule::linear(50, 1e-3, 0.02);
  const auto other = NoiseSchedule::linear(50, 1e-3, 0.03);
  const auto same_values = NoiseSchedule::linear(50, 1e-3, 0.02);
  const auto src = GaussianSource::scalar(0.0, 1.0);
  const GaussianScoreOracle oracle(src, sched);
  CHECK_THROWS_AS(ode::decode(v1(0.5), 10, 0.5, other, oracle), std::invalid_argument);
  // A value-equal copy of the schedule is accepted.
  CHECK_NOTHROW(ode::decode(v1(0.5), 10, 0.5, same_values, oracle));
}

TEST_CASE("rho outside [0,1] rejected") {
  const auto sched = NoiseSchedule::linear(10, 0.01, 0.02);
  const auto src = GaussianSource::scalar(0.0, 1.0);
  const GaussianScoreOracle oracle(src, sched);
  CHECK_THROWS_AS(ode::decode(v1(0.0), 5, 1.2, sched, oracle), std::invalid_argument);
  CHECK_THROWS_AS(ode::recon_coeffs_exact(src, sched, 5, -0.2), std::invalid_argument);
  CHECK_THROWS_AS(ode::contraction_factor(1.0, sched, 5, 2.0), std::invalid_argument);
  CHECK_THROWS_AS(ode::decode(v1(0.0), 11, 0.5, sched, oracle), std::out_of_range);
}
