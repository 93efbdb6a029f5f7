#include <cmath>
#include <numbers>

#include <doctest.h>

#include "proxdiff/metrics.hpp"
#include "proxdiff/rng.hpp"

using namespace proxdiff;

namespace {

Eigen::MatrixXd normal_rows(int n, int dim, double mean, std::uint64_t seed) {
  CounterRng rng({0x6d657472u, seed});
  Eigen::MatrixXd m(n, dim);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < dim; ++j) m(i, j) = mean + rng.normal();
  }
  return m;
}

}  // namespace

TEST_SUITE_BEGIN("metrics");

TEST_CASE("energy distance between well-separated Gaussians") {
  // Closed form for N(0,1) vs N(10,1): E|a-b| = 10 up to an exp(-25) term and
  // E|a-a'| = 2/sqrt(pi), so ED = 20 - 4/sqrt(pi).
  const double closed_form = 20.0 - 4.0 / std::sqrt(std::numbers::pi);
  const Eigen::MatrixXd a = normal_rows(10000, 1, 0.0, 1);
  const Eigen::MatrixXd b = normal_rows(10000, 1, 10.0, 2);
  const double ed = energy_distance(a, b);
  CHECK(ed == doctest::Approx(closed_form).epsilon(0.012));  // ~0.2 absolute
  CHECK(ed > 15.0);
}

TEST_CASE("energy distance of a set against itself is slightly negative") {
  // The within terms are U-statistics over distinct pairs while the cross term
  // includes the zero self-distances, leaving -2 E||x-x'|| / (n-1).
  const Eigen::MatrixXd a = normal_rows(200, 2, 0.0, 3);
  const double ed = energy_distance(a, a);
  CHECK(ed < 0.0);
  CHECK(ed > -0.05);
}

TEST_CASE("energy distance is invariant under a joint rotation") {
  const Eigen::MatrixXd a = normal_rows(300, 2, 0.0, 4);
  const Eigen::MatrixXd b = normal_rows(280, 2, 1.5, 5);
  Eigen::Matrix2d rot;
  const double ang = 0.83;
  rot << std::cos(ang), -std::sin(ang), std::sin(ang), std::cos(ang);
  const double base = energy_distance(a, b);
  const double rotated = energy_distance(a * rot.transpose(), b * rot.transpose());
  CHECK(rotated == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("oversized sets are thinned by stride") {
  const Eigen::MatrixXd a = normal_rows(100, 1, 0.0, 6);
  const Eigen::MatrixXd b = normal_rows(40, 1, 2.0, 7);
  // stride ceil(100/50) = 2 keeps rows 0, 2, 4, ...
  Eigen::MatrixXd thinned(50, 1);
  for (int i = 0; i < 50; ++i) thinned.row(i) = a.row(2 * i);
  CHECK(energy_distance(a, b, 50) == energy_distance(thinned, b));
}

TEST_CASE("energy distance input validation") {
  const Eigen::MatrixXd a = normal_rows(10, 2, 0.0, 8);
  const Eigen::MatrixXd b = normal_rows(10, 3, 0.0, 9);
  CHECK_THROWS_AS(energy_distance(a, b), std::invalid_argument);
  CHECK_THROWS_AS(energy_distance(a.topRows(1), a), std::invalid_argument);
  CHECK_THROWS_AS(energy_distance(a, a.topRows(0)), std::invalid_argument);
  CHECK_THROWS_AS(energy_distance(a, a, 1), std::invalid_argument);
}

TEST_CASE("sample statistics use the population convention") {
  Eigen::MatrixXd pts(3, 2);
  pts << 1.0, 0.0, 3.0, 4.0, 5.0, 2.0;
  const Eigen::VectorXd mean = sample_mean(pts);
  CHECK(mean(0) == doctest::Approx(3.0).epsilon(1e-15));
  CHECK(mean(1) == doctest::Approx(2.0).epsilon(1e-15));

  const Eigen::MatrixXd cov = sample_covariance(pts);
  CHECK(cov(0, 0) == doctest::Approx(8.0 / 3.0).epsilon(1e-14));
  CHECK(cov(1, 1) == doctest::Approx(8.0 / 3.0).epsilon(1e-14));
  CHECK(cov(0, 1) == doctest::Approx(4.0 / 3.0).epsilon(1e-14));
  CHECK(cov(0, 1) == cov(1, 0));

  CHECK_THROWS_AS(sample_mean(Eigen::MatrixXd(0, 2)), std::invalid_argument);
  CHECK_THROWS_AS(sample_covariance(pts.topRows(1)), std::invalid_argument);
}

TEST_CASE("sample statistics converge on a known distribution") {
  const int n = 100000;
  CounterRng rng({0x6d766172u, 1});
  Eigen::MatrixXd pts(n, 2);
  for (int i = 0; i < n; ++i) {
    const double z0 = rng.normal();
    const double z1 = rng.normal();
    pts(i, 0) = 1.0 + 2.0 * z0;        // N(1, 4)
    pts(i, 1) = -0.5 + z0 + z1;        // N(-0.5, 2), cov with first = 2
  }
  const Eigen::VectorXd mean = sample_mean(pts);
  const Eigen::MatrixXd cov = sample_covariance(pts);
  const double se = 2.0 / std::sqrt(static_cast<double>(n));
  CHECK(std::abs(mean(0) - 1.0) <= 4.0 * se);
  CHECK(std::abs(mean(1) + 0.5) <= 4.0 * se);
  CHECK(std::abs(cov(0, 0) - 4.0) <= 0.1);
  CHECK(std::abs(cov(1, 1) - 2.0) <= 0.1);
  CHECK(std::abs(cov(0, 1) - 2.0) <= 0.1);
}

TEST_CASE("max_abs_difference") {
  Eigen::MatrixXd a(2, 2), b(2, 2);
  a << 1.0, 2.0, 3.0, 4.0;
  b << 1.5, 2.0, 3.0, 1.0;
  CHECK(max_abs_difference(a, b) == 3.0);
  CHECK(max_abs_difference(a, a) == 0.0);
  CHECK_THROWS_AS(max_abs_difference(a, Eigen::MatrixXd(2, 3)), std::invalid_argument);
}

TEST_SUITE_END();
