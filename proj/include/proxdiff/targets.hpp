#pragma once

#include <stdexcept>
#include <vector>

#include <Eigen/Core>

#include "proxdiff/rng.hpp"
#include "proxdiff/schedule.hpp"

namespace proxdiff {

// A condition is either a data label (0..num_labels-1) or the null token used
// for unconditional queries / classifier-free guidance.
class ConditionToken {
 public:
  static ConditionToken null() { return ConditionToken(-1); }
  static ConditionToken label(int id) {
    if (id < 0) throw std::invalid_argument("ConditionToken::label: id must be >= 0");
    return ConditionToken(id);
  }

  bool is_null() const { return v_ < 0; }
  int id() const {
    if (is_null()) throw std::logic_error("ConditionToken::id called on the null token");
    return v_;
  }
  bool operator==(const ConditionToken& o) const { return v_ == o.v_; }
  bool operator!=(const ConditionToken& o) const { return v_ != o.v_; }

 private:
  explicit ConditionToken(int v) : v_(v) {}
  int v_;
};

// One isotropic Gaussian component: weight * N(mean, var * I).
struct Component {
  double weight = 1.0;
  Eigen::VectorXd mean;
  double var = 1.0;
};

// Raised when the brute-force prox optimizer cannot certify its answer.
struct OracleFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Conditional Gaussian-mixture data distribution with closed-form noisy
// marginals. Each label owns a component list; the unconditional distribution
// is the equal-weight mixture over labels. The schedule is bound in so that
// time-t quantities need no extra plumbing.
class MixtureTarget {
 public:
  MixtureTarget(NoiseSchedule schedule, int dim,
                std::vector<std::vector<Component>> per_label);

  int dim() const { return dim_; }
  int num_labels() const { return static_cast<int>(per_label_.size()); }
  const NoiseSchedule& schedule() const { return schedule_; }

  // Clean (t = 0) components under token c; null -> unconditional mixture.
  const std::vector<Component>& components(ConditionToken c) const;

  // Draws x0 ~ p_data(. | c).
  Eigen::VectorXd sample(ConditionToken c, CounterRng& rng) const;

 private:
  NoiseSchedule schedule_;
  int dim_;
  std::vector<std::vector<Component>> per_label_;
  std::vector<Component> unconditional_;
};

// Components of the time-t marginal under token c: means scale by
// sqrt(alpha_t), variances become alpha_t * var + (1 - alpha_t); weights are
// unchanged.
std::vector<Component> marginal_params(const MixtureTarget& target, ConditionToken c,
                                       double t);

// log p_t(x | c) of the noisy mixture marginal (stable log-sum-exp).
double oracle_logpdf(const MixtureTarget& target, ConditionToken c,
                     const Eigen::VectorXd& x, double t);

// grad_x log p_t(x | c).
Eigen::VectorXd oracle_score(const MixtureTarget& target, ConditionToken c,
                             const Eigen::VectorXd& x, double t);

// A proximal query: argmin_u  -lambda * log p_t(u | c) + 1/2 ||u - x||^2.
struct ProxQuery {
  Eigen::VectorXd x;
  double t = 0.0;
  double lambda = 1.0;
  ConditionToken c = ConditionToken::null();
};

// Closed form for a single-component conditional:
// (v_t x + lambda sqrt(alpha_t) mu) / (v_t + lambda). Throws
// std::logic_error when the conditional under q.c has more than one component.
Eigen::VectorXd oracle_prox_gaussian(const MixtureTarget& target, const ProxQuery& q);

// Multi-start damped-Newton minimizer of the prox objective, run to gradient
// norm <= 1e-10. Starts from x and from every diffused component mean, keeps
// the lowest objective value. Throws OracleFailure when no start certifies.
Eigen::VectorXd bruteforce_prox(const MixtureTarget& target, const ProxQuery& q);

// || -lambda * score(u) + u - x ||, the norm of the prox first-order
// condition; 0 exactly at the prox point.
double prox_residual(const MixtureTarget& target, const Eigen::VectorXd& u,
                     const ProxQuery& q);

}  // namespace proxdiff
