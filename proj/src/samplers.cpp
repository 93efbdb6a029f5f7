#include "proxdiff/samplers.hpp"

#include <cmath>
#include <string>

#include "proxdiff/rng.hpp"

namespace proxdiff {

namespace {

void check_step_index(int k, const TimeGrid& grid, const char* who) {
  if (k < 1 || k > grid.steps) {
    throw std::invalid_argument(std::string(who) + ": step index " + std::to_string(k) +
                                " outside [1, " + std::to_string(grid.steps) + "]");
  }
}

void check_finite(const Eigen::VectorXd& x, int k, const char* who) {
  if (!x.allFinite()) {
    throw std::runtime_error(std::string(who) + ": non-finite state leaving step k=" +
                             std::to_string(k));
  }
}

}  // namespace

Eigen::VectorXd score_cfg(const ScoreFn& score, const Eigen::VectorXd& x, double t,
                          ConditionToken c, double omega) {
  if (omega == 0.0) return score(x, t, c);
  if (omega == -1.0) return score(x, t, ConditionToken::null());
  return (1.0 + omega) * score(x, t, c) - omega * score(x, t, ConditionToken::null());
}

Eigen::VectorXd prox_cfg(const ProxFn& prox, const Eigen::VectorXd& x, double t,
                         double lambda, ConditionToken c, double omega) {
  if (omega == 0.0) return prox(x, t, lambda, c);
  if (omega == -1.0) return prox(x, t, lambda, ConditionToken::null());
  return (1.0 + omega) * prox(x, t, lambda, c) - omega * prox(x, t, lambda, ConditionToken::null());
}

Eigen::VectorXd sde_euler_step(const Eigen::VectorXd& x, int k, const TimeGrid& grid,
                               const ScoreFn& score, ConditionToken c, double omega,
                               const Eigen::VectorXd& xi) {
  check_step_index(k, grid, "sde_euler_step");
  const double gamma = grid.gamma(k);
  const Eigen::VectorXd s = score_cfg(score, x, grid.t(k), c, omega);
  Eigen::VectorXd out = x + gamma * (0.5 * x + s) + std::sqrt(gamma) * xi;
  check_finite(out, k, "sde_euler_step");
  return out;
}

Eigen::VectorXd ode_euler_step(const Eigen::VectorXd& x, int k, const TimeGrid& grid,
                               const ScoreFn& score, ConditionToken c, double omega) {
  check_step_index(k, grid, "ode_euler_step");
  const double gamma = grid.gamma(k);
  const Eigen::VectorXd s = score_cfg(score, x, grid.t(k), c, omega);
  Eigen::VectorXd out = x + gamma * (0.5 * x + 0.5 * s);
  check_finite(out, k, "ode_euler_step");
  return out;
}

Eigen::VectorXd pda_step(const Eigen::VectorXd& x, int k, const TimeGrid& grid,
                         const ProxFn& prox, ConditionToken c, double omega,
                         const Eigen::VectorXd& xi) {
  check_step_index(k, grid, "pda_step");
  const double gamma = grid.gamma(k);
  if (!(gamma < 2.0)) {
    throw StepSizeError("pda_step: gamma_k = " + std::to_string(gamma) + " at step k=" +
                        std::to_string(k) + " but the PDA update needs gamma_k < 2");
  }
  const double lambda = 2.0 * gamma / (2.0 - gamma);
  const Eigen::VectorXd arg = (2.0 / (2.0 - gamma)) * (x + std::sqrt(gamma) * xi);
  Eigen::VectorXd out = prox_cfg(prox, arg, grid.t(k - 1), lambda, c, omega);
  check_finite(out, k, "pda_step");
  return out;
}

Eigen::VectorXd pda_hybrid_step(const Eigen::VectorXd& x, int k, const TimeGrid& grid,
                                const ProxFn& prox, ConditionToken c, double omega,
                                const Eigen::VectorXd& xi) {
  check_step_index(k, grid, "pda_hybrid_step");
  const double gamma = grid.gamma(k);
  const Eigen::VectorXd arg = (1.0 + 0.5 * gamma) * x + std::sqrt(gamma) * xi;
  Eigen::VectorXd out = prox_cfg(prox, arg, grid.t(k - 1), gamma, c, omega);
  check_finite(out, k, "pda_hybrid_step");
  return out;
}

SamplerFns oracle_fns(const MixtureTarget& target) {
  SamplerFns fns;
  fns.score = [&target](const Eigen::VectorXd& x, double t, ConditionToken c) {
    return oracle_score(target, c, x, t);
  };
  fns.prox = [&target](const Eigen::VectorXd& x, double t, double lambda, ConditionToken c) {
    ProxQuery q{x, t, lambda, c};
    if (target.components(c).size() == 1) return oracle_prox_gaussian(target, q);
    return bruteforce_prox(target, q);
  };
  return fns;
}

SamplerFns net_fns(const Net& net) {
  SamplerFns fns;
  if (net.arch().kind == NetKind::Prox) {
    fns.prox = [&net](const Eigen::VectorXd& x, double t, double lambda, ConditionToken c) {
      return net.prox_forward(x, t, lambda, c);
    };
  } else {
    fns.score = [&net](const Eigen::VectorXd& x, double t, ConditionToken c) {
      return net.score_forward(x, t, c);
    };
  }
  return fns;
}

ChainRecord run_chain(const StepRule& rule, const TimeGrid& grid, int dim,
                      const SamplerFns& fns, ConditionToken token, std::uint64_t seed,
                      std::uint64_t chain_index) {
  if (dim < 1) throw std::invalid_argument("run_chain: dim must be >= 1");
  if (rule.is_prox() && !fns.prox) {
    throw std::invalid_argument("run_chain: rule needs a prox map but none was given");
  }
  if (!rule.is_prox() && !fns.score) {
    throw std::invalid_argument("run_chain: rule needs a score map but none was given");
  }
  const int K = grid.steps;

  const auto step_noise = [&](int k) {
    CounterRng rng({seed, chain_index, static_cast<std::uint64_t>(k), 2});
    return rng.normal_vec(dim);
  };

  ChainRecord rec;
  rec.rule = rule;
  rec.token = token;
  rec.grid = grid;
  {
    CounterRng rng({seed, chain_index, 0, 1});
    rec.x_init = rng.normal_vec(dim);
  }
  rec.states.reserve(static_cast<std::size_t>(K) + 1);

  if (rule.tag == StepRuleTag::PdaHybrid) {
    // Noise-lifted chain: the recorded states are Y_K .. Y_0.
    const double gK = grid.gamma(K);
    rec.noises.push_back(step_noise(K));
    rec.states.push_back((1.0 + 0.5 * gK) * rec.x_init + std::sqrt(gK) * rec.noises[0]);
    for (int k = K; k >= 2; --k) {
      const Eigen::VectorXd f =
          prox_cfg(fns.prox, rec.states.back(), grid.t(k - 1), grid.gamma(k), token, rule.omega);
      const double g = grid.gamma(k - 1);
      rec.noises.push_back(step_noise(k - 1));
      Eigen::VectorXd y = (1.0 + 0.5 * g) * f + std::sqrt(g) * rec.noises.back();
      check_finite(y, k, "run_chain[pda_hybrid]");
      rec.states.push_back(std::move(y));
    }
    Eigen::VectorXd y0 =
        prox_cfg(fns.prox, rec.states.back(), grid.t(0), grid.gamma(1), token, rule.omega);
    check_finite(y0, 1, "run_chain[pda_hybrid]");
    rec.states.push_back(std::move(y0));
    return rec;
  }

  rec.states.push_back(rec.x_init);
  for (int k = K; k >= 1; --k) {
    Eigen::VectorXd next;
    switch (rule.tag) {
      case StepRuleTag::SdeEuler:
        rec.noises.push_back(step_noise(k));
        next = sde_euler_step(rec.states.back(), k, grid, fns.score, token, rule.omega,
                              rec.noises.back());
        break;
      case StepRuleTag::OdeEuler:
        next = ode_euler_step(rec.states.back(), k, grid, fns.score, token, rule.omega);
        break;
      case StepRuleTag::Pda:
        rec.noises.push_back(step_noise(k));
        next = pda_step(rec.states.back(), k, grid, fns.prox, token, rule.omega,
                        rec.noises.back());
        break;
      case StepRuleTag::PdaHybrid:
        break;  // handled above
    }
    rec.states.push_back(std::move(next));
  }
  return rec;
}

std::vector<Eigen::VectorXd> sample_batch(const StepRule& rule, const TimeGrid& grid,
                                          int dim, const SamplerFns& fns,
                                          const std::vector<ConditionToken>& labels,
                                          int n, std::uint64_t seed) {
  if (labels.empty()) throw std::invalid_argument("sample_batch: labels must be non-empty");
  std::vector<Eigen::VectorXd> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const ConditionToken token = labels[static_cast<std::size_t>(i) % labels.size()];
    out.push_back(run_chain(rule, grid, dim, fns, token, seed,
                            static_cast<std::uint64_t>(i))
                      .final_sample());
  }
  return out;
}

GaussianChainMoments pda_hybrid_gaussian_moments(const NoiseSchedule& s, const TimeGrid& grid,
                                                 double mu, double sigma2) {
  // One step k maps X_k to prox_{t_{k-1}, gamma_k}((1 + gamma_k/2) X_k +
  // sqrt(gamma_k) xi) with the Gaussian prox (v y + lambda sqrt(alpha) mu) /
  // (v + lambda), v = alpha sigma2 + (1 - alpha) at the destination time.
  GaussianChainMoments m;  // X_K ~ N(0, 1)
  for (int k = grid.steps; k >= 1; --k) {
    const double gamma = grid.gamma(k);
    const double a = alpha_at(s, grid.t(k - 1));
    const double v = a * sigma2 + (1.0 - a);
    const double lift = 1.0 + gamma / 2.0;
    const double shrink = v / (v + gamma);
    m.mean = shrink * lift * m.mean + gamma * std::sqrt(a) * mu / (v + gamma);
    m.var = shrink * shrink * (lift * lift * m.var + gamma);
  }
  return m;
}

}  // namespace proxdiff
