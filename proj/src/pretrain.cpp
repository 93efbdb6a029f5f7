#include "proxdiff/pretrain.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace proxdiff {

namespace {

constexpr std::uint64_t kPmStream = 0x706d5f626174ull;   // "pm_bat"
constexpr std::uint64_t kDsmStream = 0x64736d5f62ull;    // "dsm_b"

void check_pretrain_config(const PretrainConfig& cfg) {
  if (cfg.batch < 1) throw std::invalid_argument("PretrainConfig: batch must be >= 1");
  if (cfg.iters < 0) throw std::invalid_argument("PretrainConfig: iters must be >= 0");
  if (!(cfg.zeta > 0.0)) throw std::invalid_argument("PretrainConfig: zeta must be > 0");
  if (!(cfg.p_null >= 0.0 && cfg.p_null <= 1.0)) {
    throw std::invalid_argument("PretrainConfig: p_null must lie in [0, 1]");
  }
}

}  // namespace

StepGridSet::StepGridSet(const NoiseSchedule& schedule, double t_min, std::vector<int> counts)
    : schedule_(schedule), t_min_(t_min), counts_(std::move(counts)) {
  if (counts_.empty()) throw std::invalid_argument("StepGridSet: need at least one step count");
  for (int k : counts_) {
    grids_.push_back(make_time_grid(schedule_, k, t_min_));
  }
}

bool StepGridSet::supports(int steps) const {
  return std::find(counts_.begin(), counts_.end(), steps) != counts_.end();
}

const TimeGrid& StepGridSet::grid_for(int steps) const {
  for (std::size_t i = 0; i < counts_.size(); ++i) {
    if (counts_[i] == steps) return grids_[i];
  }
  throw std::invalid_argument("StepGridSet: step count " + std::to_string(steps) +
                              " is not in the trained grid set");
}

std::vector<std::pair<double, double>> StepGridSet::support_pairs() const {
  std::vector<std::pair<double, double>> pairs;
  for (const TimeGrid& g : grids_) {
    for (int k = 1; k <= g.steps; ++k) pairs.emplace_back(g.t(k - 1), g.gamma(k));
  }
  return pairs;
}

std::pair<double, double> sample_t_lambda(const StepGridSet& gridset, CounterRng& rng) {
  const auto& counts = gridset.counts();
  const int K = counts[static_cast<std::size_t>(rng.uniform_int(static_cast<int>(counts.size())))];
  const TimeGrid& grid = gridset.grid_for(K);
  const int k = 1 + rng.uniform_int(K);
  return {grid.t(k - 1), grid.gamma(k)};
}

double pm_loss(const Eigen::VectorXd& output, const Eigen::VectorXd& target, double zeta) {
  if (!(zeta > 0.0)) throw std::invalid_argument("pm_loss: zeta must be > 0");
  if (output.size() != target.size()) {
    throw std::invalid_argument("pm_loss: output and target dimensions differ");
  }
  const double d = static_cast<double>(output.size());
  return 1.0 - std::exp(-(output - target).squaredNorm() / (d * zeta * zeta));
}

std::vector<PmSample> make_pm_batch(const MixtureTarget& target, const StepGridSet& gridset,
                                    const PretrainConfig& cfg, int iter) {
  check_pretrain_config(cfg);
  const int d = target.dim();
  std::vector<PmSample> batch(static_cast<std::size_t>(cfg.batch));
  for (int j = 0; j < cfg.batch; ++j) {
    CounterRng rng({cfg.seed, kPmStream, static_cast<std::uint64_t>(iter),
                    static_cast<std::uint64_t>(j)});
    PmSample& s = batch[static_cast<std::size_t>(j)];
    const ConditionToken data_label = ConditionToken::label(rng.uniform_int(target.num_labels()));
    s.token = rng.uniform01() < cfg.p_null ? ConditionToken::null() : data_label;
    std::tie(s.t, s.lambda) = sample_t_lambda(gridset, rng);
    const Eigen::VectorXd x0 = target.sample(data_label, rng);
    s.x_t = forward_marginal(target.schedule(), x0, s.t, rng.normal_vec(d));
    s.query = s.x_t + std::sqrt(s.lambda) * rng.normal_vec(d);
  }
  return batch;
}

double pm_batch_loss(const std::function<Eigen::VectorXd(const PmSample&)>& f,
                     const std::vector<PmSample>& batch, double zeta) {
  if (batch.empty()) throw std::invalid_argument("pm_batch_loss: empty batch");
  double total = 0.0;
  for (const PmSample& s : batch) total += pm_loss(f(s), s.x_t, zeta);
  return total / static_cast<double>(batch.size());
}

double pm_batch_loss(const Net& net, const std::vector<PmSample>& batch, double zeta) {
  return pm_batch_loss(
      [&net](const PmSample& s) { return net.prox_forward(s.query, s.t, s.lambda, s.token); },
      batch, zeta);
}

double pm_batch_loss_grad(const Net& net, const std::vector<PmSample>& batch, double zeta,
                          Eigen::VectorXd& grad) {
  if (batch.empty()) throw std::invalid_argument("pm_batch_loss_grad: empty batch");
  if (!(zeta > 0.0)) throw std::invalid_argument("pm_batch_loss_grad: zeta must be > 0");
  const double d = static_cast<double>(net.arch().dim);
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  const double inv_dz2 = 1.0 / (d * zeta * zeta);
  double total = 0.0;
  ForwardCache cache;
  for (const PmSample& s : batch) {
    const Eigen::VectorXd out = net.forward_cached(s.query, s.t, s.lambda, s.token, cache);
    const Eigen::VectorXd r = out - s.x_t;
    const double e = std::exp(-r.squaredNorm() * inv_dz2);
    total += 1.0 - e;
    // d/d(out) [1 - exp(-||r||^2/(d zeta^2))] = exp(.) * 2 r / (d zeta^2)
    net.backward(cache, (2.0 * e * inv_dz2 * inv_b) * r, grad);
  }
  return total * inv_b;
}

double pm_training_step(Net& net, const MixtureTarget& target, const StepGridSet& gridset,
                        const PretrainConfig& cfg, Optimizer& opt, int iter) {
  const std::vector<PmSample> batch = make_pm_batch(target, gridset, cfg, iter);
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(net.param_count());
  const double loss = pm_batch_loss_grad(net, batch, cfg.zeta, grad);
  if (!std::isfinite(loss)) {
    throw std::runtime_error("pm_training_step: non-finite loss at iteration " +
                             std::to_string(iter));
  }
  opt.step(net.params(), grad);
  return loss;
}

std::vector<DsmSample> make_dsm_batch(const MixtureTarget& target, double t_min,
                                      const PretrainConfig& cfg, int iter) {
  check_pretrain_config(cfg);
  if (!(t_min >= 0.0 && t_min < 1.0)) {
    throw std::invalid_argument("make_dsm_batch: t_min must lie in [0, 1)");
  }
  const int d = target.dim();
  std::vector<DsmSample> batch(static_cast<std::size_t>(cfg.batch));
  for (int j = 0; j < cfg.batch; ++j) {
    CounterRng rng({cfg.seed, kDsmStream, static_cast<std::uint64_t>(iter),
                    static_cast<std::uint64_t>(j)});
    DsmSample& s = batch[static_cast<std::size_t>(j)];
    const ConditionToken data_label = ConditionToken::label(rng.uniform_int(target.num_labels()));
    s.token = rng.uniform01() < cfg.p_null ? ConditionToken::null() : data_label;
    s.t = t_min + (1.0 - t_min) * rng.uniform01();
    const Eigen::VectorXd x0 = target.sample(data_label, rng);
    s.eps = rng.normal_vec(d);
    s.x_t = forward_marginal(target.schedule(), x0, s.t, s.eps);
  }
  return batch;
}

double dsm_batch_loss(const Net& net, const std::vector<DsmSample>& batch) {
  if (batch.empty()) throw std::invalid_argument("dsm_batch_loss: empty batch");
  const double d = static_cast<double>(net.arch().dim);
  double total = 0.0;
  ForwardCache cache;
  for (const DsmSample& s : batch) {
    net.forward_cached(s.x_t, s.t, 0.0, s.token, cache);
    total += (cache.raw - s.eps).squaredNorm() / d;
  }
  return total / static_cast<double>(batch.size());
}

double dsm_batch_loss_grad(const Net& net, const std::vector<DsmSample>& batch,
                           Eigen::VectorXd& grad) {
  if (batch.empty()) throw std::invalid_argument("dsm_batch_loss_grad: empty batch");
  const double d = static_cast<double>(net.arch().dim);
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  double total = 0.0;
  ForwardCache cache;
  for (const DsmSample& s : batch) {
    net.forward_cached(s.x_t, s.t, 0.0, s.token, cache);
    const Eigen::VectorXd r = cache.raw - s.eps;
    total += r.squaredNorm() / d;
    net.backward_from_raw(cache, (2.0 * inv_b / d) * r, grad);
  }
  return total * inv_b;
}

double dsm_training_step(Net& net, const MixtureTarget& target, const PretrainConfig& cfg,
                         Optimizer& opt, int iter) {
  const std::vector<DsmSample> batch = make_dsm_batch(target, net.meta().t_min, cfg, iter);
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(net.param_count());
  const double loss = dsm_batch_loss_grad(net, batch, grad);
  if (!std::isfinite(loss)) {
    throw std::runtime_error("dsm_training_step: non-finite loss at iteration " +
                             std::to_string(iter));
  }
  opt.step(net.params(), grad);
  return loss;
}

namespace {

template <typename StepFn>
std::vector<TrainPoint> train_loop(const PretrainConfig& cfg, int log_every, StepFn step) {
  check_pretrain_config(cfg);
  if (log_every < 1) log_every = 1;
  std::vector<TrainPoint> curve;
  for (int it = 0; it < cfg.iters; ++it) {
    const double loss = step(it);
    if (it % log_every == 0 || it == cfg.iters - 1) curve.push_back({it, loss});
  }
  return curve;
}

}  // namespace

std::vector<TrainPoint> pretrain_prox(Net& net, const MixtureTarget& target,
                                      const StepGridSet& gridset, const PretrainConfig& cfg,
                                      int log_every) {
  if (net.arch().kind != NetKind::Prox) {
    throw std::logic_error("pretrain_prox: needs a prox net");
  }
  Optimizer opt(cfg.optimizer, cfg.lr, net.param_count(), cfg.momentum);
  return train_loop(cfg, log_every, [&](int it) {
    return pm_training_step(net, target, gridset, cfg, opt, it);
  });
}

std::vector<TrainPoint> pretrain_score(Net& net, const MixtureTarget& target,
                                       const PretrainConfig& cfg, int log_every) {
  if (net.arch().kind != NetKind::Score) {
    throw std::logic_error("pretrain_score: needs a score net");
  }
  Optimizer opt(cfg.optimizer, cfg.lr, net.param_count(), cfg.momentum);
  return train_loop(cfg, log_every, [&](int it) {
    return dsm_training_step(net, target, cfg, opt, it);
  });
}

}  // namespace proxdiff
