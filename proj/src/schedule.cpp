#include "proxdiff/schedule.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace proxdiff {

namespace {

void check_schedule(const NoiseSchedule& s) {
  if (!(s.beta_min > 0.0) || !(s.beta_max >= s.beta_min)) {
    throw std::domain_error("NoiseSchedule requires 0 < beta_min <= beta_max, got beta_min=" +
                            std::to_string(s.beta_min) + " beta_max=" + std::to_string(s.beta_max));
  }
}

void check_time(double t) {
  if (!(t >= 0.0 && t <= 1.0)) {
    throw std::domain_error("schedule time must lie in [0, 1], got t=" + std::to_string(t));
  }
}

}  // namespace

double beta_at(const NoiseSchedule& s, double t) {
  check_schedule(s);
  check_time(t);
  return s.beta_min + (s.beta_max - s.beta_min) * t;
}

double alpha_at(const NoiseSchedule& s, double t) {
  check_schedule(s);
  check_time(t);
  const double integral = s.beta_min * t + 0.5 * (s.beta_max - s.beta_min) * t * t;
  return std::exp(-integral);
}

TimeGrid make_time_grid(const NoiseSchedule& s, int steps, double t_min) {
  check_schedule(s);
  if (steps < 1) {
    throw std::invalid_argument("make_time_grid: steps must be >= 1, got " + std::to_string(steps));
  }
  if (!(t_min >= 0.0 && t_min < 1.0)) {
    throw std::invalid_argument("make_time_grid: t_min must lie in [0, 1), got " +
                                std::to_string(t_min));
  }
  TimeGrid grid;
  grid.steps = steps;
  grid.times.resize(static_cast<std::size_t>(steps) + 1);
  for (int k = 0; k <= steps; ++k) {
    grid.times[static_cast<std::size_t>(k)] =
        t_min + (static_cast<double>(k) / steps) * (1.0 - t_min);
  }
  grid.times.front() = t_min;
  grid.times.back() = 1.0;  // guard against rounding in the affine formula
  grid.gammas.resize(static_cast<std::size_t>(steps));
  for (int k = 1; k <= steps; ++k) {
    const double dt = grid.times[static_cast<std::size_t>(k)] -
                      grid.times[static_cast<std::size_t>(k) - 1];
    grid.gammas[static_cast<std::size_t>(k) - 1] = beta_at(s, grid.times[static_cast<std::size_t>(k)]) * dt;
  }
  return grid;
}

Eigen::VectorXd forward_marginal(const NoiseSchedule& s, const Eigen::VectorXd& x0,
                                 double t, const Eigen::VectorXd& noise) {
  if (x0.size() != noise.size()) {
    throw std::invalid_argument("forward_marginal: x0 has dimension " + std::to_string(x0.size()) +
                                " but noise has dimension " + std::to_string(noise.size()));
  }
  const double alpha = alpha_at(s, t);
  return std::sqrt(alpha) * x0 + std::sqrt(1.0 - alpha) * noise;
}

}  // namespace proxdiff
