#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include <Eigen/Core>

#include "proxdiff/net.hpp"
#include "proxdiff/optim.hpp"
#include "proxdiff/samplers.hpp"
#include "proxdiff/targets.hpp"

namespace proxdiff {

// Scalar reward on a final sample under its condition.
using RewardFn = std::function<double(const Eigen::VectorXd&, ConditionToken)>;

// R(x, c) = -||x - mode_c|| where mode_c is the highest-weight component mean
// of the label's conditional (first on ties). Null conditions are rejected.
RewardFn make_mode_distance_reward(const MixtureTarget& target);

// R(x, c) = -| ||x|| - r_c | with r_c = ||mode_c||.
RewardFn make_ring_reward(const MixtureTarget& target);

struct GRPOConfig {
  int group = 24;               // chains per prompt
  int steps = 10;               // sampler steps K
  double beta_kl = 0.001;       // KL penalty weight
  double clip = 0.2;            // PPO clip radius epsilon
  double omega = 0.0;           // guidance weight used in rollouts
  double lr = 1e-4;
  double momentum = 0.9;
  OptimizerKind optimizer = OptimizerKind::Sgd;
  int updates = 300;
  int prompts_per_batch = 4;
  int accum_chunks = 6;         // gradient-accumulation sub-batches per update
  int inner_epochs = 1;         // extra ascent passes over the same rollouts
  double adv_eps = 1e-8;        // std floor in the advantage normalizer
  std::uint64_t seed = 0;
};

// (r_i - mean) / max(population std, eps). Zero-mean by construction; all-equal
// rewards give exactly zero. Needs at least two rewards.
std::vector<double> compute_advantages(const std::vector<double>& rewards, double eps = 1e-8);

// Log-density of the Gaussian transition into index k-1:
//   N(y_next; (1 + gamma_{k-1}/2) f_out, gamma_{k-1} I)
// where f_out is the guided prox output at the source state. Valid for
// k in [2, K]; k = 1 is the deterministic terminal map and raises
// std::logic_error.
double transition_logpdf(const Eigen::VectorXd& y_next, int k, const TimeGrid& grid,
                         const Eigen::VectorXd& f_out);

// KL between two transitions that share the covariance gamma_{k-1} I:
//   (1 + gamma_{k-1}/2)^2 ||f_theta - f_ref||^2 / (2 gamma_{k-1}).
double transition_kl(const Eigen::VectorXd& f_theta, const Eigen::VectorXd& f_ref, int k,
                     const TimeGrid& grid);

// One prompt's rollouts plus everything the surrogate needs to replay them.
struct GroupBatch {
  ConditionToken token = ConditionToken::null();
  std::vector<ChainRecord> chains;
  std::vector<double> rewards;
  std::vector<double> advantages;
  // old_logpdf[i][k-2] is the behavior-policy log-density of chain i's
  // transition k -> k-1, for k = 2..K.
  std::vector<std::vector<double>> old_logpdf;
};

// Rolls cfg.group PDA-hybrid chains from `policy` (the behavior snapshot),
// scores them, and caches advantages and per-transition log-densities.
GroupBatch rollout_group(const Net& policy, ConditionToken token, const GRPOConfig& cfg,
                         const RewardFn& reward, std::uint64_t seed);

struct GrpoBatchStats {
  double kl_sum = 0.0;
  long clipped = 0;
  long transitions = 0;
};

// Clipped surrogate minus the KL penalty, summed over chains i = 1..G and
// transitions k = K..2:
//   sum min(r Adv, clip(r, 1-eps, 1+eps) Adv) - beta_kl * KL_k
// with r the density ratio of the current policy to the cached behavior
// values. grpo_objective_grad also accumulates d(objective)/d(params) —
// gradients flow through both guidance branches — and fills `stats`.
double grpo_objective(const Net& net, const Net& ref, const GroupBatch& batch,
                      const GRPOConfig& cfg);
double grpo_objective_grad(const Net& net, const Net& ref, const GroupBatch& batch,
                           const GRPOConfig& cfg, Eigen::VectorXd& grad,
                           GrpoBatchStats* stats = nullptr);

struct GrpoLogRow {
  int update = 0;
  double mean_reward = 0.0;
  double mean_kl = 0.0;
  double clip_fraction = 0.0;
};

// Fine-tuning loop: snapshot the reference once, then per update snapshot the
// behavior policy, roll groups for a batch of prompts (cycled), and take one
// ascent step on the accumulated surrogate gradient (normalized by the number
// of transition terms; accumulation runs in cfg.accum_chunks sub-batches).
// on_update, when given, fires after each update with the 1-based update
// index and the freshly stepped net (checkpointing hook).
std::vector<GrpoLogRow> grpo_update_loop(Net& net, const std::vector<ConditionToken>& prompts,
                                         const GRPOConfig& cfg, const RewardFn& reward,
                                         const std::function<void(int, const Net&)>& on_update = {});

}  // namespace proxdiff
