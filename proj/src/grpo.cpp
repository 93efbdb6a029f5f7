#include "proxdiff/grpo.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "proxdiff/rng.hpp"

namespace proxdiff {

namespace {

constexpr std::uint64_t kGrpoStream = 0x6772706full;  // "grpo"

// Highest-weight component mean of the label's conditional; ties keep the
// first.
Eigen::VectorXd designated_mode(const MixtureTarget& target, ConditionToken c) {
  if (c.is_null()) {
    throw std::invalid_argument("reward: null condition has no designated mode");
  }
  const auto& comps = target.components(c);
  const Component* best = &comps.front();
  for (const Component& cm : comps) {
    if (cm.weight > best->weight) best = &cm;
  }
  return best->mean;
}

void check_grpo_config(const GRPOConfig& cfg) {
  if (cfg.group < 2) throw std::invalid_argument("GRPOConfig: group must be >= 2");
  if (cfg.steps < 2) throw std::invalid_argument("GRPOConfig: steps must be >= 2");
  if (!(cfg.clip > 0.0)) throw std::invalid_argument("GRPOConfig: clip must be > 0");
  if (!(cfg.beta_kl >= 0.0)) throw std::invalid_argument("GRPOConfig: beta_kl must be >= 0");
  if (cfg.prompts_per_batch < 1) {
    throw std::invalid_argument("GRPOConfig: prompts_per_batch must be >= 1");
  }
  if (cfg.accum_chunks < 1) throw std::invalid_argument("GRPOConfig: accum_chunks must be >= 1");
  if (cfg.inner_epochs < 1) throw std::invalid_argument("GRPOConfig: inner_epochs must be >= 1");
  if (!(cfg.adv_eps > 0.0)) throw std::invalid_argument("GRPOConfig: adv_eps must be > 0");
}

double check_transition_index(int k, const TimeGrid& grid, const char* who) {
  if (k == 1) {
    throw std::logic_error(std::string(who) +
                           ": k=1 is the deterministic terminal map and has no density");
  }
  if (k < 2 || k > grid.steps) {
    throw std::invalid_argument(std::string(who) + ": transition index " + std::to_string(k) +
                                " outside [2, " + std::to_string(grid.steps) + "]");
  }
  return grid.gamma(k - 1);
}

}  // namespace

RewardFn make_mode_distance_reward(const MixtureTarget& target) {
  return [&target](const Eigen::VectorXd& x, ConditionToken c) {
    return -(x - designated_mode(target, c)).norm();
  };
}

RewardFn make_ring_reward(const MixtureTarget& target) {
  return [&target](const Eigen::VectorXd& x, ConditionToken c) {
    const double radius = designated_mode(target, c).norm();
    return -std::abs(x.norm() - radius);
  };
}

std::vector<double> compute_advantages(const std::vector<double>& rewards, double eps) {
  if (rewards.size() < 2) {
    throw std::invalid_argument("compute_advantages: need at least 2 rewards, got " +
                                std::to_string(rewards.size()));
  }
  if (!(eps > 0.0)) throw std::invalid_argument("compute_advantages: eps must be > 0");
  const double n = static_cast<double>(rewards.size());
  double mean = 0.0;
  for (double r : rewards) mean += r;
  mean /= n;
  double var = 0.0;
  for (double r : rewards) var += (r - mean) * (r - mean);
  var /= n;  // population variance
  const double denom = std::max(std::sqrt(var), eps);
  std::vector<double> adv(rewards.size());
  for (std::size_t i = 0; i < rewards.size(); ++i) adv[i] = (rewards[i] - mean) / denom;
  return adv;
}

double transition_logpdf(const Eigen::VectorXd& y_next, int k, const TimeGrid& grid,
                         const Eigen::VectorXd& f_out) {
  const double gamma = check_transition_index(k, grid, "transition_logpdf");
  if (y_next.size() != f_out.size()) {
    throw std::invalid_argument("transition_logpdf: dimension mismatch");
  }
  const double d = static_cast<double>(y_next.size());
  const Eigen::VectorXd mean = (1.0 + 0.5 * gamma) * f_out;
  return -0.5 * d * std::log(2.0 * std::numbers::pi * gamma) -
         (y_next - mean).squaredNorm() / (2.0 * gamma);
}

double transition_kl(const Eigen::VectorXd& f_theta, const Eigen::VectorXd& f_ref, int k,
                     const TimeGrid& grid) {
  const double gamma = check_transition_index(k, grid, "transition_kl");
  if (f_theta.size() != f_ref.size()) {
    throw std::invalid_argument("transition_kl: dimension mismatch");
  }
  const double scale = 1.0 + 0.5 * gamma;
  return scale * scale * (f_theta - f_ref).squaredNorm() / (2.0 * gamma);
}

GroupBatch rollout_group(const Net& policy, ConditionToken token, const GRPOConfig& cfg,
                         const RewardFn& reward, std::uint64_t seed) {
  check_grpo_config(cfg);
  if (policy.arch().kind != NetKind::Prox) {
    throw std::logic_error("rollout_group: policy must be a prox net");
  }
  const TimeGrid grid =
      make_time_grid(policy.meta().schedule, cfg.steps, policy.meta().t_min);
  const SamplerFns fns = net_fns(policy);
  const StepRule rule{StepRuleTag::PdaHybrid, cfg.omega};

  GroupBatch batch;
  batch.token = token;
  batch.chains.reserve(static_cast<std::size_t>(cfg.group));
  for (int i = 0; i < cfg.group; ++i) {
    batch.chains.push_back(run_chain(rule, grid, policy.arch().dim, fns, token, seed,
                                     static_cast<std::uint64_t>(i)));
    const double r = reward(batch.chains.back().final_sample(), token);
    if (!std::isfinite(r)) {
      throw std::runtime_error("rollout_group: non-finite reward for chain " +
                               std::to_string(i));
    }
    batch.rewards.push_back(r);
  }
  batch.advantages = compute_advantages(batch.rewards, cfg.adv_eps);

  batch.old_logpdf.assign(batch.chains.size(), std::vector<double>(
                                                   static_cast<std::size_t>(cfg.steps - 1)));
  for (std::size_t i = 0; i < batch.chains.size(); ++i) {
    const ChainRecord& chain = batch.chains[i];
    for (int k = 2; k <= cfg.steps; ++k) {
      const Eigen::VectorXd f = prox_cfg(fns.prox, chain.state(k), grid.t(k - 1),
                                         grid.gamma(k), token, cfg.omega);
      batch.old_logpdf[i][static_cast<std::size_t>(k - 2)] =
          transition_logpdf(chain.state(k - 1), k, grid, f);
    }
  }
  return batch;
}

namespace {

// Shared implementation: objective value, optionally with gradient/stats.
double grpo_objective_impl(const Net& net, const Net& ref, const GroupBatch& batch,
                           const GRPOConfig& cfg, Eigen::VectorXd* grad,
                           GrpoBatchStats* stats) {
  check_grpo_config(cfg);
  if (batch.chains.empty()) throw std::invalid_argument("grpo_objective: empty batch");
  if (!(net.arch() == ref.arch())) {
    throw std::invalid_argument("grpo_objective: net and reference have different architectures");
  }
  const TimeGrid& grid = batch.chains.front().grid;
  if (grid.steps != cfg.steps) {
    throw std::invalid_argument("grpo_objective: batch was rolled with a different step count");
  }
  const double omega = cfg.omega;
  const SamplerFns ref_fns = net_fns(ref);

  double objective = 0.0;
  ForwardCache cond_cache, null_cache;
  for (std::size_t i = 0; i < batch.chains.size(); ++i) {
    const ChainRecord& chain = batch.chains[i];
    const double adv = batch.advantages[i];
    for (int k = cfg.steps; k >= 2; --k) {
      const double t_prev = grid.t(k - 1);
      const double lambda = grid.gamma(k);
      const double gamma = grid.gamma(k - 1);
      const double lift = 1.0 + 0.5 * gamma;
      const Eigen::VectorXd& y_cur = chain.state(k);
      const Eigen::VectorXd& y_next = chain.state(k - 1);

      // Guided prox under the current policy, caching both branches so the
      // gradient can flow through each.
      Eigen::VectorXd f_theta;
      if (omega == 0.0) {
        f_theta = net.forward_cached(y_cur, t_prev, lambda, batch.token, cond_cache);
      } else {
        const Eigen::VectorXd f_c =
            net.forward_cached(y_cur, t_prev, lambda, batch.token, cond_cache);
        const Eigen::VectorXd f_n =
            net.forward_cached(y_cur, t_prev, lambda, ConditionToken::null(), null_cache);
        f_theta = (1.0 + omega) * f_c - omega * f_n;
      }

      const double logp = transition_logpdf(y_next, k, grid, f_theta);
      const double ratio = std::exp(logp - batch.old_logpdf[i][static_cast<std::size_t>(k - 2)]);
      if (!std::isfinite(ratio)) {
        throw std::runtime_error("grpo_objective: non-finite ratio at chain " +
                                 std::to_string(i) + ", transition k=" + std::to_string(k));
      }
      const double clipped_ratio = std::clamp(ratio, 1.0 - cfg.clip, 1.0 + cfg.clip);
      const double unclipped = ratio * adv;
      const double clipped = clipped_ratio * adv;
      objective += std::min(unclipped, clipped);

      const Eigen::VectorXd f_ref =
          prox_cfg(ref_fns.prox, y_cur, t_prev, lambda, batch.token, omega);
      const double kl = transition_kl(f_theta, f_ref, k, grid);
      objective -= cfg.beta_kl * kl;

      if (stats != nullptr) {
        stats->kl_sum += kl;
        stats->transitions += 1;
        if (ratio < 1.0 - cfg.clip || ratio > 1.0 + cfg.clip) stats->clipped += 1;
      }
      if (grad == nullptr) continue;

      // d(term)/d(logp): the unclipped branch carries ratio * adv; a binding
      // clip freezes the term.
      const double d_logp = (unclipped <= clipped) ? ratio * adv : 0.0;
      // d(logp)/d(f) = lift * (y_next - lift f) / gamma
      Eigen::VectorXd d_f = (d_logp * lift / gamma) * (y_next - lift * f_theta);
      // d(KL)/d(f_theta) = lift^2 (f_theta - f_ref) / gamma
      d_f -= (cfg.beta_kl * lift * lift / gamma) * (f_theta - f_ref);
      if (omega == 0.0) {
        net.backward(cond_cache, d_f, *grad);
      } else {
        net.backward(cond_cache, ((1.0 + omega) * d_f).eval(), *grad);
        net.backward(null_cache, (-omega * d_f).eval(), *grad);
      }
    }
  }
  return objective;
}

std::uint64_t derive_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  CounterRng rng({kGrpoStream, a, b, c});
  return rng.next_u64();
}

}  // namespace

double grpo_objective(const Net& net, const Net& ref, const GroupBatch& batch,
                      const GRPOConfig& cfg) {
  return grpo_objective_impl(net, ref, batch, cfg, nullptr, nullptr);
}

double grpo_objective_grad(const Net& net, const Net& ref, const GroupBatch& batch,
                           const GRPOConfig& cfg, Eigen::VectorXd& grad,
                           GrpoBatchStats* stats) {
  if (grad.size() != net.param_count()) {
    throw std::invalid_argument("grpo_objective_grad: gradient buffer has wrong size");
  }
  return grpo_objective_impl(net, ref, batch, cfg, &grad, stats);
}

std::vector<GrpoLogRow> grpo_update_loop(Net& net, const std::vector<ConditionToken>& prompts,
                                         const GRPOConfig& cfg, const RewardFn& reward,
                                         const std::function<void(int, const Net&)>& on_update) {
  check_grpo_config(cfg);
  if (prompts.empty()) throw std::invalid_argument("grpo_update_loop: prompts must be non-empty");
  if (net.arch().kind != NetKind::Prox) {
    throw std::logic_error("grpo_update_loop: policy must be a prox net");
  }

  const Net ref = net.snapshot();
  Optimizer opt(cfg.optimizer, cfg.lr, net.param_count(), cfg.momentum);
  std::vector<GrpoLogRow> log;
  log.reserve(static_cast<std::size_t>(cfg.updates));

  const int per_chunk =
      (cfg.prompts_per_batch + cfg.accum_chunks - 1) / cfg.accum_chunks;

  for (int u = 0; u < cfg.updates; ++u) {
    const Net behavior = net.snapshot();
    std::vector<GroupBatch> batches;
    batches.reserve(static_cast<std::size_t>(cfg.prompts_per_batch));
    double reward_sum = 0.0;
    for (int j = 0; j < cfg.prompts_per_batch; ++j) {
      const ConditionToken token =
          prompts[(static_cast<std::size_t>(u) * static_cast<std::size_t>(cfg.prompts_per_batch) +
                   static_cast<std::size_t>(j)) %
                  prompts.size()];
      batches.push_back(rollout_group(behavior, token, cfg, reward,
                                      derive_seed(cfg.seed, static_cast<std::uint64_t>(u),
                                                  static_cast<std::uint64_t>(j))));
      for (double r : batches.back().rewards) reward_sum += r;
    }

    GrpoBatchStats stats;
    for (int epoch = 0; epoch < cfg.inner_epochs; ++epoch) {
      Eigen::VectorXd grad = Eigen::VectorXd::Zero(net.param_count());
      GrpoBatchStats epoch_stats;
      // Gradient accumulation over sub-batches of prompts; the sum is taken
      // chunk by chunk, then one ascent step.
      for (std::size_t start = 0; start < batches.size();
           start += static_cast<std::size_t>(per_chunk)) {
        const std::size_t stop =
            std::min(batches.size(), start + static_cast<std::size_t>(per_chunk));
        for (std::size_t b = start; b < stop; ++b) {
          grpo_objective_grad(net, ref, batches[b], cfg, grad, &epoch_stats);
        }
      }
      if (epoch == 0) stats = epoch_stats;
      // Normalize to a per-transition average so the learning rate does not
      // depend on group size or step count, then ascend.
      grad /= static_cast<double>(std::max<long>(epoch_stats.transitions, 1));
      grad = -grad;
      opt.step(net.params(), grad);
    }

    GrpoLogRow row;
    row.update = u;
    row.mean_reward =
        reward_sum / static_cast<double>(cfg.prompts_per_batch * cfg.group);
    row.mean_kl = stats.kl_sum / static_cast<double>(std::max<long>(stats.transitions, 1));
    row.clip_fraction =
        static_cast<double>(stats.clipped) /
        static_cast<double>(std::max<long>(stats.transitions, 1));
    log.push_back(row);
    if (on_update) on_update(u + 1, net);
  }
  return log;
}

}  // namespace proxdiff
