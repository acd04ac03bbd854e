#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "oracles.hpp"
#include "rdpflow/schedule.hpp"
#include "rdpflow/sources.hpp"

using namespace rdpflow;

TEST_CASE("single-step schedule") {
  const auto sched = NoiseSchedule::linear(1, 0.5, 0.5);
  CHECK(sched.steps() == 1);
  CHECK(sched.beta(1) == 0.5);
  CHECK(sched.alpha_bar(1) == 0.5);
  CHECK(sched.alpha_bar(0) == 1.0);
}

TEST_CASE("two-step product") {
  const auto sched = NoiseSchedule::linear(2, 0.1, 0.3);
  CHECK_THAT(sched.alpha_bar(2), Catch::Matchers::WithinULP(0.9 * 0.7, 2));
}

TEST_CASE("default DDPM schedule endpoint") {
  const auto sched = NoiseSchedule::linear(1000, 1e-4, 0.02);
  std::vector<double> beta;
  for (int k = 1; k <= 1000; ++k) beta.push_back(sched.beta(k));
  const double want = oracles::alpha_bar_log_oracle(beta);
  CHECK_THAT(sched.alpha_bar(1000), Catch::Matchers::WithinRel(want, 1e-10));
  // Standard value is about 4.0e-5.
  CHECK(sched.alpha_bar(1000) > 4.0e-5 * 0.95);
  CHECK(sched.alpha_bar(1000) < 4.0e-5 * 1.05);
}

TEST_CASE("invalid ranges rejected") {
  CHECK_THROWS_AS(NoiseSchedule::linear(0, 0.1, 0.2), std::invalid_argument);
  CHECK_THROWS_AS(NoiseSchedule::linear(10, 0.0, 0.2), std::invalid_argument);
  CHECK_THROWS_AS(NoiseSchedule::linear(10, 0.1, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(NoiseSchedule::linear(10, 0.3, 0.2), std::invalid_argument);
  CHECK_THROWS_AS(NoiseSchedule(std::vector<double>{0.2, 0.1}), std::invalid_argument);
}

TEST_CASE("recurrence alpha_bar_k = alpha_k * alpha_bar_{k-1} within 1 ulp") {
  const auto sched = NoiseSchedule::linear(1000, 1e-4, 0.02);
  for (int k = 1; k <= sched.steps(); ++k) {
    const double lhs = sched.alpha_bar(k);
    const double rhs = sched.alpha(k) * sched.alpha_bar(k - 1);
    CHECK_THAT(lhs, Catch::Matchers::WithinULP(rhs, 1));
  }
}

TEST_CASE("alpha_bar strictly decreasing inside (0,1)") {
  const auto sched = NoiseSchedule::linear(500, 2e-4, 0.04);
  for (int k = 1; k <= sched.steps(); ++k) {
    CHECK(sched.alpha_bar(k) > 0.0);
    CHECK(sched.alpha_bar(k) < 1.0);
    CHECK(sched.alpha_bar(k) < sched.alpha_bar(k - 1));
  }
}

TEST_CASE("perturbation statistics") {
  const auto sched = NoiseSchedule::linear(10, 0.1, 0.1);

  SECTION("unit variance is a fixed point") {
    const auto src = GaussianSource::scalar(0.3, 1.0);
    for (int t : {1, 5, 10}) {
      const auto stats = perturb_stats(src, sched, t);
      CHECK_THAT(stats.cov(0, 0), Catch::Matchers::WithinULP(1.0, 4));
      CHECK_THAT(stats.mean[0],
                 Catch::Matchers::WithinULP(std::sqrt(sched.alpha_bar(t)) * 0.3, 4));
    }
  }

  SECTION("formula arithmetic at alpha_bar = 0.25") {
    // Tailored two-step schedule hitting alpha_bar_2 = 0.25 exactly.
    const auto half = NoiseSchedule::linear(2, 0.5, 0.5);
    const auto src = GaussianSource::scalar(0.5, 4.0);
    const auto stats = perturb_stats(src, half, 2);
    CHECK_THAT(stats.cov(0, 0), Catch::Matchers::WithinULP(1.75, 4));
    CHECK_THAT(stats.mean[0], Catch::Matchers::WithinULP(0.25, 4));
  }

  SECTION("diagonal case") {
    const auto half = NoiseSchedule(std::vector<double>{0.5});
    Eigen::VectorXd mu = Eigen::VectorXd::Zero(2);
    Eigen::MatrixXd cov(2, 2);
    cov << 2.0, 0.0, 0.0, 0.5;
    const GaussianSource src(mu, cov);
    const auto stats = perturb_stats(src, half, 1);
    CHECK_THAT(stats.cov(0, 0), Catch::Matchers::WithinULP(1.5, 4));
    CHECK_THAT(stats.cov(1, 1), Catch::Matchers::WithinULP(0.75, 4));
    CHECK(stats.cov(0, 1) == 0.0);
  }

  SECTION("index out of range") {
    const auto src = GaussianSource::scalar(0.0, 1.0);
    CHECK_THROWS_AS(perturb_stats(src, sched, 0), std::out_of_range);
    CHECK_THROWS_AS(perturb_stats(src, sched, 11), std::out_of_range);
  }
}

TEST_CASE("perturbed eigenvalues match eigenvalue map") {
  const auto sched = NoiseSchedule::linear(50, 1e-3, 0.05);
  Eigen::VectorXd mu = Eigen::VectorXd::Zero(2);
  Eigen::MatrixXd cov(2, 2);
  cov << 2.0, 0.7, 0.7, 1.0;
  const GaussianSource src(mu, cov);
  for (int t : {1, 17, 50}) {
    const auto stats = perturb_stats(src, sched, t);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(stats.cov);
    for (int l = 0; l < 2; ++l) {
      const double want = perturbed_eigenvalue(src.eigvals()[l], sched.alpha_bar(t));
      CHECK_THAT(eig.eigenvalues()[l], Catch::Matchers::WithinRel(want, 1e-12));
    }
  }
}

TEST_CASE("trace is nondecreasing in t when all eigenvalues <= 1") {
  const auto sched = NoiseSchedule::linear(100, 1e-3, 0.05);
  Eigen::VectorXd mu = Eigen::VectorXd::Zero(2);
  Eigen::MatrixXd cov(2, 2);
  cov << 0.8, 0.1, 0.1, 0.4;
  const GaussianSource src(mu, cov);
  double prev = perturb_stats(src, sched, 1).cov.trace();
  for (int t = 2; t <= sched.steps(); ++t) {
    const double cur = perturb_stats(src, sched, t).cov.trace();
    CHECK(cur >= prev - 1e-15);
    prev = cur;
  }
}
