#include <cmath>

#include <doctest.h>

#include "proxdiff/rng.hpp"
#include "proxdiff/schedule.hpp"

using namespace proxdiff;

TEST_SUITE_BEGIN("schedule");

TEST_CASE("beta_at is the linear schedule") {
  const NoiseSchedule s;  // beta_min 0.1, beta_max 20
  CHECK(beta_at(s, 0.0) == 0.1);
  CHECK(beta_at(s, 1.0) == 20.0);
  CHECK(beta_at(s, 0.5) == doctest::Approx(10.05).epsilon(1e-15));
  CHECK_THROWS_AS(beta_at(s, -0.01), std::domain_error);
  CHECK_THROWS_AS(beta_at(s, 1.01), std::domain_error);
}

TEST_CASE("alpha_at closed form and endpoints") {
  const NoiseSchedule s;
  CHECK(alpha_at(s, 0.0) == 1.0);
  CHECK(alpha_at(s, 1.0) == doctest::Approx(4.3185749060341303e-05).epsilon(1e-12));
  NoiseSchedule flat;
  flat.beta_min = flat.beta_max = 1.0;
  CHECK(alpha_at(flat, 0.5) == doctest::Approx(0.60653065971263342).epsilon(1e-15));
  CHECK_THROWS_AS(alpha_at(s, 1.5), std::domain_error);
}

TEST_CASE("alpha_at strictly decreasing") {
  const NoiseSchedule s;
  double prev = alpha_at(s, 0.0);
  for (int i = 1; i <= 500; ++i) {
    const double a = alpha_at(s, i / 500.0);
    CHECK(a < prev);
    prev = a;
  }
}

TEST_CASE("make_time_grid single step") {
  const NoiseSchedule s;
  const TimeGrid g = make_time_grid(s, 1, 0.5);
  CHECK(g.times.size() == 2);
  CHECK(g.t(0) == 0.5);
  CHECK(g.t(1) == 1.0);
  CHECK(g.gamma(1) == doctest::Approx(20.0 * 0.5).epsilon(1e-15));
}

TEST_CASE("make_time_grid constant beta gives constant gammas") {
  NoiseSchedule flat;
  flat.beta_min = flat.beta_max = 1.0;
  const TimeGrid g = make_time_grid(flat, 4, 0.0);
  for (int k = 1; k <= 4; ++k) CHECK(g.gamma(k) == doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("make_time_grid default K=4 grid") {
  const NoiseSchedule s;
  const TimeGrid g = make_time_grid(s, 4, 1e-3);
  CHECK(g.t(1) == doctest::Approx(0.25075).epsilon(1e-15));
  CHECK(g.t(2) == doctest::Approx(0.5005).epsilon(1e-15));
  CHECK(g.t(3) == doctest::Approx(0.75025).epsilon(1e-15));
  CHECK(g.t(4) == 1.0);
  CHECK(g.gamma(1) == doctest::Approx(1.27120876875).epsilon(1e-14));
  CHECK(g.gamma(2) == doctest::Approx(2.5124725125).epsilon(1e-14));
  CHECK(g.gamma(3) == doctest::Approx(3.75373625625).epsilon(1e-14));
  CHECK(g.gamma(4) == doctest::Approx(4.995).epsilon(1e-14));
}

TEST_CASE("make_time_grid rejects bad arguments") {
  const NoiseSchedule s;
  CHECK_THROWS_AS(make_time_grid(s, 0, 1e-3), std::invalid_argument);
  CHECK_THROWS_AS(make_time_grid(s, 4, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(make_time_grid(s, 4, -0.1), std::invalid_argument);
}

TEST_CASE("grid covers [t_min, 1] with positive gammas") {
  const NoiseSchedule s;
  for (int K : {1, 3, 10, 25}) {
    const TimeGrid g = make_time_grid(s, K, 1e-3);
    double span = 0.0;
    for (int k = 1; k <= K; ++k) {
      span += g.t(k) - g.t(k - 1);
      CHECK(g.gamma(k) > 0.0);
    }
    CHECK(span == doctest::Approx(1.0 - 1e-3).epsilon(1e-12));
  }
}

TEST_CASE("forward_marginal endpoints and worked example") {
  const NoiseSchedule s;
  Eigen::VectorXd x0(2), xi(2);
  x0 << 1.0, 0.0;
  xi << 0.0, 1.0;
  CHECK(forward_marginal(s, x0, 0.0, xi) == x0);

  NoiseSchedule flat;
  flat.beta_min = flat.beta_max = 1.0;
  const Eigen::VectorXd y = forward_marginal(flat, x0, 0.5, xi);
  CHECK(y(0) == doctest::Approx(0.77880078307140487).epsilon(1e-15));
  CHECK(y(1) == doctest::Approx(0.62727134502332129).epsilon(1e-15));

  Eigen::VectorXd zero = Eigen::VectorXd::Zero(2);
  const Eigen::VectorXd z = forward_marginal(flat, zero, 0.5, xi);
  CHECK(z(1) == doctest::Approx(std::sqrt(1.0 - std::exp(-0.5))).epsilon(1e-15));

  Eigen::VectorXd bad(3);
  bad.setZero();
  CHECK_THROWS_AS(forward_marginal(s, x0, 0.5, bad), std::invalid_argument);
}

TEST_CASE("forward_marginal empirical moments") {
  const NoiseSchedule s;
  const double t = 0.4;
  Eigen::VectorXd x0(2);
  x0 << 1.0, -2.0;
  const int n = 100000;
  CounterRng rng({0x73636864u, 9});
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  Eigen::Matrix2d second = Eigen::Matrix2d::Zero();
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd xi(2);
    xi << rng.normal(), rng.normal();
    const Eigen::VectorXd x = forward_marginal(s, x0, t, xi);
    mean += x;
    second += x * x.transpose();
  }
  mean /= n;
  const Eigen::Matrix2d cov = second / n - mean * mean.transpose();
  const double a = alpha_at(s, t);
  const double se_mean = std::sqrt((1.0 - a) / n);
  const double se_var = (1.0 - a) * std::sqrt(2.0 / (n - 1));
  for (int j = 0; j < 2; ++j) {
    CHECK(std::abs(mean(j) - std::sqrt(a) * x0(j)) <= 4.0 * se_mean);
    CHECK(std::abs(cov(j, j) - (1.0 - a)) <= 4.0 * se_var);
  }
  CHECK(std::abs(cov(0, 1)) <= 4.0 * se_var);
}

TEST_SUITE_END();
