#include "proxdiff/targets.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include <Eigen/Dense>

namespace proxdiff {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;  // log(2*pi)

void check_query_point(const MixtureTarget& target, const Eigen::VectorXd& x) {
  if (x.size() != target.dim()) {
    throw std::invalid_argument("query point has dimension " + std::to_string(x.size()) +
                                ", target has dimension " + std::to_string(target.dim()));
  }
  if (!x.allFinite()) throw std::domain_error("query point must be finite");
}

// log-weights and per-component Gaussian log-densities at x.
Eigen::VectorXd component_logits(const std::vector<Component>& comps,
                                 const Eigen::VectorXd& x) {
  const auto n = static_cast<Eigen::Index>(comps.size());
  const double d = static_cast<double>(x.size());
  Eigen::VectorXd logits(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Component& c = comps[static_cast<std::size_t>(i)];
    const double sq = (x - c.mean).squaredNorm();
    logits[i] = std::log(c.weight) - 0.5 * d * (kLog2Pi + std::log(c.var)) - 0.5 * sq / c.var;
  }
  return logits;
}

double logsumexp(const Eigen::VectorXd& v) {
  const double m = v.maxCoeff();
  return m + std::log((v.array() - m).exp().sum());
}

struct MixtureLocal {
  double logpdf;
  Eigen::VectorXd score;     // grad_x log p
  Eigen::MatrixXd neg_hess;  // -hess_x log p
};

// Density, score and negative log-density Hessian of a Gaussian mixture at x.
MixtureLocal mixture_local(const std::vector<Component>& comps, const Eigen::VectorXd& x,
                           bool want_hess) {
  const Eigen::Index d = x.size();
  Eigen::VectorXd logits = component_logits(comps, x);
  const double lse = logsumexp(logits);
  Eigen::VectorXd resp = (logits.array() - lse).exp();

  MixtureLocal out;
  out.logpdf = lse;
  out.score = Eigen::VectorXd::Zero(d);
  std::vector<Eigen::VectorXd> pulls(comps.size());
  for (std::size_t i = 0; i < comps.size(); ++i) {
    pulls[i] = (comps[i].mean - x) / comps[i].var;
    out.score += resp[static_cast<Eigen::Index>(i)] * pulls[i];
  }
  if (want_hess) {
    // -hess log p = sum_i r_i I/v_i - sum_i r_i g_i g_i^T + s s^T  with
    // g_i = (m_i - x)/v_i and s the mixture score.
    out.neg_hess = Eigen::MatrixXd::Zero(d, d);
    double diag = 0.0;
    for (std::size_t i = 0; i < comps.size(); ++i) {
      const double r = resp[static_cast<Eigen::Index>(i)];
      diag += r / comps[i].var;
      out.neg_hess.noalias() -= r * pulls[i] * pulls[i].transpose();
    }
    out.neg_hess.diagonal().array() += diag;
    out.neg_hess.noalias() += out.score * out.score.transpose();
  }
  return out;
}

void check_prox_query(const MixtureTarget& target, const ProxQuery& q) {
  check_query_point(target, q.x);
  if (!(q.lambda > 0.0) || !std::isfinite(q.lambda)) {
    throw std::domain_error("prox query requires lambda > 0, got " + std::to_string(q.lambda));
  }
}

}  // namespace

MixtureTarget::MixtureTarget(NoiseSchedule schedule, int dim,
                             std::vector<std::vector<Component>> per_label)
    : schedule_(schedule), dim_(dim), per_label_(std::move(per_label)) {
  if (dim_ < 1) throw std::invalid_argument("MixtureTarget: dim must be >= 1");
  if (per_label_.empty()) throw std::invalid_argument("MixtureTarget: need at least one label");
  for (std::size_t c = 0; c < per_label_.size(); ++c) {
    const auto& comps = per_label_[c];
    if (comps.empty()) {
      throw std::invalid_argument("MixtureTarget: label " + std::to_string(c) +
                                  " has no components");
    }
    double wsum = 0.0;
    for (const Component& cm : comps) {
      if (cm.mean.size() != dim_) {
        throw std::invalid_argument("MixtureTarget: component mean dimension mismatch for label " +
                                    std::to_string(c));
      }
      if (!(cm.weight >= 0.0)) {
        throw std::invalid_argument("MixtureTarget: component weights must be nonnegative");
      }
      if (!(cm.var > 0.0)) {
        throw std::invalid_argument("MixtureTarget: component variances must be positive");
      }
      wsum += cm.weight;
    }
    if (std::abs(wsum - 1.0) > 1e-9) {
      throw std::invalid_argument("MixtureTarget: weights for label " + std::to_string(c) +
                                  " sum to " + std::to_string(wsum) + ", expected 1");
    }
  }
  // Unconditional mixture: equal-weight average over the label conditionals.
  const double inv_labels = 1.0 / static_cast<double>(per_label_.size());
  for (const auto& comps : per_label_) {
    for (const Component& cm : comps) {
      unconditional_.push_back({cm.weight * inv_labels, cm.mean, cm.var});
    }
  }
}

const std::vector<Component>& MixtureTarget::components(ConditionToken c) const {
  if (c.is_null()) return unconditional_;
  if (c.id() >= num_labels()) {
    throw std::invalid_argument("MixtureTarget: label " + std::to_string(c.id()) +
                                " out of range (have " + std::to_string(num_labels()) + ")");
  }
  return per_label_[static_cast<std::size_t>(c.id())];
}

Eigen::VectorXd MixtureTarget::sample(ConditionToken c, CounterRng& rng) const {
  const auto& comps = components(c);
  const double u = rng.uniform01();
  double acc = 0.0;
  std::size_t pick = comps.size() - 1;
  for (std::size_t i = 0; i < comps.size(); ++i) {
    acc += comps[i].weight;
    if (u <= acc) {
      pick = i;
      break;
    }
  }
  const Component& cm = comps[pick];
  return cm.mean + std::sqrt(cm.var) * rng.normal_vec(dim_);
}

std::vector<Component> marginal_params(const MixtureTarget& target, ConditionToken c,
                                       double t) {
  const double alpha = alpha_at(target.schedule(), t);
  const double sqrt_alpha = std::sqrt(alpha);
  std::vector<Component> out = target.components(c);
  for (Component& cm : out) {
    cm.mean *= sqrt_alpha;
    cm.var = alpha * cm.var + (1.0 - alpha);
  }
  return out;
}

double oracle_logpdf(const MixtureTarget& target, ConditionToken c,
                     const Eigen::VectorXd& x, double t) {
  check_query_point(target, x);
  return logsumexp(component_logits(marginal_params(target, c, t), x));
}

Eigen::VectorXd oracle_score(const MixtureTarget& target, ConditionToken c,
                             const Eigen::VectorXd& x, double t) {
  check_query_point(target, x);
  return mixture_local(marginal_params(target, c, t), x, /*want_hess=*/false).score;
}

Eigen::VectorXd oracle_prox_gaussian(const MixtureTarget& target, const ProxQuery& q) {
  check_prox_query(target, q);
  const std::vector<Component> comps = marginal_params(target, q.c, q.t);
  if (comps.size() != 1) {
    throw std::logic_error("oracle_prox_gaussian: conditional has " +
                           std::to_string(comps.size()) +
                           " components; closed form needs exactly one");
  }
  const Component& cm = comps.front();
  return (cm.var * q.x + q.lambda * cm.mean) / (cm.var + q.lambda);
}

Eigen::VectorXd bruteforce_prox(const MixtureTarget& target, const ProxQuery& q) {
  check_prox_query(target, q);
  const std::vector<Component> comps = marginal_params(target, q.c, q.t);
  const Eigen::Index d = q.x.size();
  constexpr double kGradTol = 1e-10;
  constexpr int kMaxIter = 500;

  const auto objective = [&](const Eigen::VectorXd& u) {
    return -q.lambda * logsumexp(component_logits(comps, u)) +
           0.5 * (u - q.x).squaredNorm();
  };

  std::vector<Eigen::VectorXd> starts;
  starts.push_back(q.x);
  for (const Component& cm : comps) starts.push_back(cm.mean);

  bool have_solution = false;
  double best_phi = std::numeric_limits<double>::infinity();
  Eigen::VectorXd best_u;

  for (const Eigen::VectorXd& start : starts) {
    Eigen::VectorXd u = start;
    double phi = objective(u);
    double mu = 0.0;  // Levenberg damping, grown on rejected steps
    bool converged = false;
    for (int it = 0; it < kMaxIter; ++it) {
      MixtureLocal loc = mixture_local(comps, u, /*want_hess=*/true);
      Eigen::VectorXd grad = -q.lambda * loc.score + (u - q.x);
      if (grad.norm() <= kGradTol) {
        converged = true;
        break;
      }
      Eigen::MatrixXd hess = q.lambda * loc.neg_hess;
      hess.diagonal().array() += 1.0 + mu;
      Eigen::VectorXd step = hess.ldlt().solve(-grad);
      if (!step.allFinite()) {
        mu = std::max(mu * 10.0, 1e-8);
        continue;
      }
      const double phi_new = objective(u + step);
      if (std::isfinite(phi_new) && phi_new <= phi) {
        u += step;
        phi = phi_new;
        mu *= 0.25;
        if (mu < 1e-14) mu = 0.0;
      } else {
        mu = std::max(mu * 10.0, 1e-8);
        if (mu > 1e12) break;  // hopeless from this start
      }
    }
    if (converged && phi < best_phi) {
      have_solution = true;
      best_phi = phi;
      best_u = u;
    }
  }

  if (!have_solution) {
    throw OracleFailure("bruteforce_prox: no start converged to gradient norm <= 1e-10 (lambda=" +
                        std::to_string(q.lambda) + ", t=" + std::to_string(q.t) + ", d=" +
                        std::to_string(d) + ")");
  }
  return best_u;
}

double prox_residual(const MixtureTarget& target, const Eigen::VectorXd& u,
                     const ProxQuery& q) {
  check_prox_query(target, q);
  check_query_point(target, u);
  const Eigen::VectorXd s = oracle_score(target, q.c, u, q.t);
  return (-q.lambda * s + u - q.x).norm();
}

}  // namespace proxdiff
