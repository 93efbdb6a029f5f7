#pragma once

#include <vector>

#include <Eigen/Core>

namespace proxdiff {

// Linear noise schedule beta(t) = beta_min + (beta_max - beta_min) * t for the
// forward process dX = -1/2 beta(t) X dt + sqrt(beta(t)) dW on t in [0, 1].
struct NoiseSchedule {
  double beta_min = 0.1;
  double beta_max = 20.0;
};

// beta(t). Throws std::domain_error if t is outside [0, 1] or the schedule
// constants are invalid (requires 0 < beta_min <= beta_max).
double beta_at(const NoiseSchedule& s, double t);

// alpha(t) = exp(-integral_0^t beta) = exp(-(beta_min t + (beta_max-beta_min) t^2 / 2)).
// The forward marginal is X_t = sqrt(alpha) X_0 + sqrt(1-alpha) xi.
double alpha_at(const NoiseSchedule& s, double t);

// Discretization of [t_min, 1] into `steps` uniform intervals. times has
// steps+1 ascending entries with times[0] = t_min and times[steps] = 1;
// gamma(k) = beta(t_k) * (t_k - t_{k-1}) > 0 for k = 1..steps. Samplers walk
// the grid from k = steps down to 1.
struct TimeGrid {
  int steps = 0;
  std::vector<double> times;   // size steps+1
  std::vector<double> gammas;  // size steps; gammas[k-1] = gamma_k

  double t(int k) const { return times.at(static_cast<std::size_t>(k)); }
  double gamma(int k) const { return gammas.at(static_cast<std::size_t>(k) - 1); }
};

// Throws std::invalid_argument when steps < 1 or t_min is outside [0, 1).
TimeGrid make_time_grid(const NoiseSchedule& s, int steps, double t_min);

// Draws X_t = sqrt(alpha(t)) x0 + sqrt(1 - alpha(t)) * noise.
// noise must already be a standard-normal draw of the same dimension as x0.
Eigen::VectorXd forward_marginal(const NoiseSchedule& s,
                                 const Eigen::VectorXd& x0, double t,
                                 const Eigen::VectorXd& noise);

}  // namespace proxdiff
