#pragma once

#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "proxdiff/net.hpp"
#include "proxdiff/optim.hpp"
#include "proxdiff/rng.hpp"
#include "proxdiff/schedule.hpp"
#include "proxdiff/targets.hpp"

namespace proxdiff {

// The step-count grids that define the training distribution of (t, lambda)
// pairs. Sampling first picks a step count uniformly, then a step uniformly,
// and returns (t_{k-1}, gamma_k) from that grid — exactly the pairs the
// PDA-hybrid sampler will query at inference.
class StepGridSet {
 public:
  StepGridSet(const NoiseSchedule& schedule, double t_min, std::vector<int> counts);

  static std::vector<int> default_counts() { return {4, 5, 6, 7, 8, 9, 10, 25}; }

  const NoiseSchedule& schedule() const { return schedule_; }
  double t_min() const { return t_min_; }
  const std::vector<int>& counts() const { return counts_; }
  bool supports(int steps) const;
  const TimeGrid& grid_for(int steps) const;  // throws if unsupported

  // Every trainable (t_{k-1}, gamma_k) pair, all grids flattened.
  std::vector<std::pair<double, double>> support_pairs() const;

 private:
  NoiseSchedule schedule_;
  double t_min_;
  std::vector<int> counts_;
  std::vector<TimeGrid> grids_;
};

std::pair<double, double> sample_t_lambda(const StepGridSet& gridset, CounterRng& rng);

struct PretrainConfig {
  int batch = 256;
  int iters = 20000;
  double lr = 1e-3;
  double momentum = 0.9;
  OptimizerKind optimizer = OptimizerKind::Sgd;
  double zeta = 1.0;    // proximal-matching sharpness
  double p_null = 0.1;  // condition-dropout probability
  std::uint64_t seed = 0;
};

// Proximal-matching loss 1 - exp(-||output - target||^2 / (d zeta^2)).
// Bounded in [0, 1), zero iff output == target. Throws on zeta <= 0 or
// dimension mismatch.
double pm_loss(const Eigen::VectorXd& output, const Eigen::VectorXd& target, double zeta);

// One training example: the net sees `query` = X_t + sqrt(lambda) eps with
// conditioning (t, lambda, token) and regresses toward x_t. The token may be
// null (condition dropout) while x_t still came from the label's conditional.
struct PmSample {
  ConditionToken token = ConditionToken::null();
  double t = 0.0;
  double lambda = 1.0;
  Eigen::VectorXd query;
  Eigen::VectorXd x_t;
};

// Deterministic batch for (seed, iter): per-sample draws use counter streams,
// so assembly order and threading cannot change the batch.
std::vector<PmSample> make_pm_batch(const MixtureTarget& target, const StepGridSet& gridset,
                                    const PretrainConfig& cfg, int iter);

// Mean pm_loss of an arbitrary map over the batch (tests stuff doubles here).
double pm_batch_loss(const std::function<Eigen::VectorXd(const PmSample&)>& f,
                     const std::vector<PmSample>& batch, double zeta);
double pm_batch_loss(const Net& net, const std::vector<PmSample>& batch, double zeta);

// Loss plus accumulated parameter gradient of the batch mean.
double pm_batch_loss_grad(const Net& net, const std::vector<PmSample>& batch, double zeta,
                          Eigen::VectorXd& grad);

// Assemble the iter-th batch, take one optimizer step, return the pre-update
// loss. Throws std::runtime_error naming the iteration if the loss goes
// non-finite.
double pm_training_step(Net& net, const MixtureTarget& target, const StepGridSet& gridset,
                        const PretrainConfig& cfg, Optimizer& opt, int iter);

// Denoising score matching example: the net's epsilon head regresses toward
// the noise that built x_t (uniform t on [t_min, 1]).
struct DsmSample {
  ConditionToken token = ConditionToken::null();
  double t = 0.0;
  Eigen::VectorXd x_t;
  Eigen::VectorXd eps;
};

std::vector<DsmSample> make_dsm_batch(const MixtureTarget& target, double t_min,
                                      const PretrainConfig& cfg, int iter);
double dsm_batch_loss(const Net& net, const std::vector<DsmSample>& batch);
double dsm_batch_loss_grad(const Net& net, const std::vector<DsmSample>& batch,
                           Eigen::VectorXd& grad);
double dsm_training_step(Net& net, const MixtureTarget& target, const PretrainConfig& cfg,
                         Optimizer& opt, int iter);

struct TrainPoint {
  int iter = 0;
  double loss = 0.0;
};

// Full loops; the returned curve holds every log_every-th pre-update loss
// (plus the final iteration).
std::vector<TrainPoint> pretrain_prox(Net& net, const MixtureTarget& target,
                                      const StepGridSet& gridset, const PretrainConfig& cfg,
                                      int log_every = 100);
std::vector<TrainPoint> pretrain_score(Net& net, const MixtureTarget& target,
                                       const PretrainConfig& cfg, int log_every = 100);

}  // namespace proxdiff
