#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <vector>

#include <doctest.h>

#include "proxdiff/net.hpp"
#include "proxdiff/optim.hpp"
#include "proxdiff/pretrain.hpp"
#include "proxdiff/rng.hpp"
#include "proxdiff/schedule.hpp"
#include "proxdiff/targets.hpp"

using namespace proxdiff;

namespace {

Eigen::VectorXd vec1(double a) {
  Eigen::VectorXd v(1);
  v << a;
  return v;
}

MixtureTarget gaussian_1d(const NoiseSchedule& s, double mu, double var) {
  return MixtureTarget(s, 1, {{Component{1.0, vec1(mu), var}}});
}

bool batch_equal(const std::vector<PmSample>& a, const std::vector<PmSample>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].token != b[i].token || a[i].t != b[i].t || a[i].lambda != b[i].lambda) return false;
    if ((a[i].query - b[i].query).cwiseAbs().maxCoeff() != 0.0) return false;
    if ((a[i].x_t - b[i].x_t).cwiseAbs().maxCoeff() != 0.0) return false;
  }
  return true;
}

}  // namespace

TEST_SUITE_BEGIN("pretrain");

TEST_CASE("StepGridSet support") {
  const NoiseSchedule s;
  CHECK(StepGridSet::default_counts() == std::vector<int>{4, 5, 6, 7, 8, 9, 10, 25});
  const StepGridSet gridset(s, 1e-3, StepGridSet::default_counts());
  CHECK(gridset.supports(4));
  CHECK(gridset.supports(25));
  CHECK_FALSE(gridset.supports(3));
  CHECK_THROWS_AS(gridset.grid_for(3), std::invalid_argument);
  CHECK(gridset.grid_for(10).steps == 10);

  const auto pairs = gridset.support_pairs();
  CHECK(pairs.size() == 4u + 5 + 6 + 7 + 8 + 9 + 10 + 25);
  for (const auto& [t, lam] : pairs) {
    CHECK(lam > 0.0);
    CHECK(t >= 0.0);
    CHECK(t < 1.0);
  }
  CHECK_THROWS_AS(StepGridSet(s, 1e-3, {}), std::invalid_argument);
}

TEST_CASE("sample_t_lambda with a single one-step grid is constant") {
  const NoiseSchedule s;
  const StepGridSet gridset(s, 0.5, {1});
  const TimeGrid g = gridset.grid_for(1);
  CounterRng rng({0x70747331u, 0});
  for (int i = 0; i < 50; ++i) {
    const auto [t, lam] = sample_t_lambda(gridset, rng);
    CHECK(t == g.t(0));
    CHECK(lam == g.gamma(1));
  }
}

TEST_CASE("sample_t_lambda draws step counts uniformly") {
  const NoiseSchedule s;
  const StepGridSet gridset(s, 1e-3, StepGridSet::default_counts());

  // Map every support pair back to its grid; pairs are distinct across grids.
  std::map<std::pair<double, double>, int> owner;
  for (int K : gridset.counts()) {
    const TimeGrid& g = gridset.grid_for(K);
    for (int k = 1; k <= K; ++k) {
      const auto key = std::make_pair(g.t(k - 1), g.gamma(k));
      CHECK(owner.emplace(key, K).second);
    }
  }

  const int n = 100000;
  std::map<int, int> hits;
  CounterRng rng({0x70747332u, 1});
  for (int i = 0; i < n; ++i) {
    const auto [t, lam] = sample_t_lambda(gridset, rng);
    const auto it = owner.find({t, lam});
    REQUIRE(it != owner.end());  // every lambda lies in the union of grid gammas
    ++hits[it->second];
  }
  const double p = 1.0 / 8.0;
  const double se = std::sqrt(p * (1.0 - p) / n);
  for (int K : gridset.counts()) {
    CHECK(std::abs(hits[K] / static_cast<double>(n) - p) <= 4.0 * se);
  }
}

TEST_CASE("pm_loss values and bounds") {
  CHECK(pm_loss(vec1(0.7), vec1(0.7), 1.0) == 0.0);
  CHECK(pm_loss(vec1(1.0), vec1(0.0), 1.0) ==
        doctest::Approx(1.0 - std::exp(-1.0)).epsilon(1e-15));

  Eigen::VectorXd a(2), b(2);
  a << 1.0, 2.0;
  b << 1.0, 2.0;
  CHECK(pm_loss(a, b, 0.5) == 0.0);

  // Strictly increasing in distance, bounded in [0, 1).
  CounterRng rng({0x706d6c73u, 2});
  std::vector<double> dists;
  for (int i = 0; i < 50; ++i) dists.push_back(3.0 * rng.uniform01());
  std::sort(dists.begin(), dists.end());
  double prev = -1.0;
  for (double d : dists) {
    const double v = pm_loss(vec1(d), vec1(0.0), 1.0);
    CHECK(v >= 0.0);
    CHECK(v < 1.0);
    CHECK(v > prev);
    prev = v;
  }
  // Saturates toward (but never reaches) 1.
  CHECK(pm_loss(vec1(1e6), vec1(0.0), 1.0) == 1.0);  // rounds to 1 in double
  CHECK(pm_loss(vec1(3.0), vec1(0.0), 1.0) < 1.0);

  CHECK_THROWS_AS(pm_loss(vec1(0.0), vec1(0.0), 0.0), std::invalid_argument);
  CHECK_THROWS_AS(pm_loss(vec1(0.0), vec1(0.0), -1.0), std::invalid_argument);
  CHECK_THROWS_AS(pm_loss(a, vec1(0.0), 1.0), std::invalid_argument);
}

TEST_CASE("make_pm_batch is deterministic and well-formed") {
  const NoiseSchedule s;
  const MixtureTarget target = gaussian_1d(s, 0.5, 1.0);
  const StepGridSet gridset(s, 1e-3, {4, 10});
  PretrainConfig cfg;
  cfg.batch = 64;
  cfg.seed = 9;

  const auto batch = make_pm_batch(target, gridset, cfg, 3);
  REQUIRE(batch.size() == 64);
  CHECK(batch_equal(batch, make_pm_batch(target, gridset, cfg, 3)));
  CHECK_FALSE(batch_equal(batch, make_pm_batch(target, gridset, cfg, 4)));

  PretrainConfig other = cfg;
  other.seed = 10;
  CHECK_FALSE(batch_equal(batch, make_pm_batch(target, gridset, other, 3)));

  // Every (t, lambda) comes from a supported grid pair.
  const auto pairs = gridset.support_pairs();
  for (const PmSample& smp : batch) {
    const bool found = std::any_of(pairs.begin(), pairs.end(), [&smp](const auto& p) {
      return p.first == smp.t && p.second == smp.lambda;
    });
    CHECK(found);
    CHECK(smp.query.size() == 1);
    CHECK(smp.x_t.size() == 1);
    CHECK(smp.query.allFinite());
  }
}

TEST_CASE("null-condition frequency matches p_null") {
  const NoiseSchedule s;
  const MixtureTarget target = gaussian_1d(s, 0.0, 1.0);
  const StepGridSet gridset(s, 1e-3, {4});
  PretrainConfig cfg;
  cfg.batch = 10000;
  cfg.p_null = 0.1;
  cfg.seed = 21;

  const auto batch = make_pm_batch(target, gridset, cfg, 0);
  int nulls = 0;
  for (const PmSample& smp : batch) nulls += smp.token.is_null() ? 1 : 0;
  const double freq = nulls / 10000.0;
  const double se = std::sqrt(0.1 * 0.9 / 10000.0);
  CHECK(std::abs(freq - 0.1) <= 4.0 * se);
}

TEST_CASE("oracle-stuffed map has zero batch loss") {
  const NoiseSchedule s;
  const MixtureTarget target = gaussian_1d(s, 1.0, 0.5);
  const StepGridSet gridset(s, 1e-3, {4});
  PretrainConfig cfg;
  cfg.batch = 32;
  cfg.seed = 4;
  const auto batch = make_pm_batch(target, gridset, cfg, 0);
  const double loss =
      pm_batch_loss([](const PmSample& smp) { return smp.x_t; }, batch, 1.0);
  CHECK(loss == 0.0);
}

TEST_CASE("all-null batches leave label embeddings untouched") {
  const NoiseSchedule s;
  const MixtureTarget target(
      s, 1, {{Component{1.0, vec1(-1.0), 0.5}}, {Component{1.0, vec1(1.0), 0.5}}});
  const StepGridSet gridset(s, 1e-3, {4});
  PretrainConfig cfg;
  cfg.batch = 32;
  cfg.p_null = 1.0;
  cfg.seed = 6;

  ModelMeta meta;
  meta.schedule = s;
  ArchDescriptor arch;
  arch.dim = 1;
  arch.num_labels = 2;
  arch.width = 16;
  arch.depth = 2;
  arch.embed_dim = 4;
  arch.fourier = 2;
  Net net = Net::make_prox(arch, meta, 12);
  CounterRng rng({0x70746e6cu, 7});
  for (Eigen::Index i = 0; i < net.param_count(); ++i) net.params()(i) += 0.2 * rng.normal();

  const auto batch = make_pm_batch(target, gridset, cfg, 0);
  for (const PmSample& smp : batch) CHECK(smp.token.is_null());

  Eigen::VectorXd grad = Eigen::VectorXd::Zero(net.param_count());
  pm_batch_loss_grad(net, batch, cfg.zeta, grad);

  const ParamBlock& tb = net.layout().label_table;
  Eigen::Map<const Eigen::MatrixXd> gtable(grad.data() + tb.offset, tb.rows, tb.cols);
  CHECK(gtable.col(0).cwiseAbs().maxCoeff() == 0.0);
  CHECK(gtable.col(1).cwiseAbs().maxCoeff() == 0.0);
  CHECK(gtable.col(2).cwiseAbs().maxCoeff() > 0.0);  // the null column trains
}

TEST_CASE("pm_training_step returns the pre-update loss and rejects divergence") {
  const NoiseSchedule s;
  const MixtureTarget target = gaussian_1d(s, 0.5, 1.0);
  const StepGridSet gridset(s, 1e-3, {4});
  PretrainConfig cfg;
  cfg.batch = 16;
  cfg.seed = 13;

  ModelMeta meta;
  meta.schedule = s;
  ArchDescriptor arch;
  arch.dim = 1;
  arch.num_labels = 1;
  arch.width = 16;
  arch.depth = 2;
  arch.embed_dim = 4;
  arch.fourier = 2;
  Net net = Net::make_prox(arch, meta, 14);

  const Net before = net.snapshot();
  Optimizer opt(cfg.optimizer, cfg.lr, net.param_count(), cfg.momentum);
  const double reported = pm_training_step(net, target, gridset, cfg, opt, 5);
  const auto batch = make_pm_batch(target, gridset, cfg, 5);
  CHECK(reported == doctest::Approx(pm_batch_loss(before, batch, cfg.zeta)).epsilon(1e-14));
  CHECK((net.params() - before.params()).cwiseAbs().maxCoeff() > 0.0);

  net.params()(0) = std::numeric_limits<double>::quiet_NaN();
  try {
    pm_training_step(net, target, gridset, cfg, opt, 7);
    FAIL("expected a divergence error");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find('7') != std::string::npos);
  }
}

TEST_CASE("pretrain_prox logs every log_every-th loss plus the final one") {
  const NoiseSchedule s;
  const MixtureTarget target = gaussian_1d(s, 0.0, 1.0);
  const StepGridSet gridset(s, 1e-3, {4});
  PretrainConfig cfg;
  cfg.batch = 8;
  cfg.iters = 10;
  cfg.seed = 2;

  ModelMeta meta;
  meta.schedule = s;
  ArchDescriptor arch;
  arch.dim = 1;
  arch.num_labels = 1;
  arch.width = 8;
  arch.depth = 1;
  arch.embed_dim = 2;
  arch.fourier = 1;
  Net net = Net::make_prox(arch, meta, 3);

  const auto curve = pretrain_prox(net, target, gridset, cfg, 3);
  REQUIRE(curve.size() == 5);
  CHECK(curve[0].iter == 0);
  CHECK(curve[1].iter == 3);
  CHECK(curve[2].iter == 6);
  CHECK(curve[3].iter == 9);
  CHECK(curve[4].iter == 9);  // final iteration always recorded
}

TEST_CASE("trained prox net approaches the closed-form operator") {
  // Unit-scale version of the bulk-accuracy contract: a reduced grid set and
  // a moderate budget must already drive the learned operator to the oracle.
  const NoiseSchedule s;
  const double mu = 0.5;
  const MixtureTarget target = gaussian_1d(s, mu, 1.0);
  const StepGridSet gridset(s, 1e-3, {4, 10});

  ModelMeta meta;
  meta.schedule = s;
  meta.step_grid = {4, 10};
  ArchDescriptor arch;
  arch.dim = 1;
  arch.num_labels = 1;
  arch.width = 64;
  arch.depth = 3;
  arch.embed_dim = 16;
  arch.fourier = 4;
  Net net = Net::make_prox(arch, meta, 2024);

  PretrainConfig cfg;
  cfg.batch = 256;
  cfg.optimizer = OptimizerKind::Adam;
  cfg.seed = 1;

  const auto eval_max = [&]() {
    double worst = 0.0;
    for (const auto& [t, lam] : gridset.support_pairs()) {
      const double tq = std::max(t, meta.t_min);
      for (int i = 0; i < 100; ++i) {
        const double x = -3.0 + 6.0 * i / 99.0;
        ProxQuery q;
        q.x = vec1(x);
        q.t = tq;
        q.lambda = lam;
        q.c = ConditionToken::label(0);
        const double err =
            std::abs(net.prox_forward(q.x, tq, lam, ConditionToken::label(0))(0) -
                     oracle_prox_gaussian(target, q)(0));
        worst = std::max(worst, err);
      }
    }
    return worst;
  };

  const double init_err = eval_max();
  cfg.iters = 15000;
  cfg.lr = 1e-3;
  pretrain_prox(net, target, gridset, cfg, 0);
  const double mid_err = eval_max();
  CHECK(mid_err < init_err);

  // A lower rate and a larger batch for the polish phase: the worst cells sit
  // in the tails of the noisy marginal, where small batches rarely look.
  cfg.iters = 10000;
  cfg.lr = 1e-4;
  cfg.batch = 1024;
  cfg.seed = 2;
  pretrain_prox(net, target, gridset, cfg, 0);
  CHECK(eval_max() <= 0.06);
}

TEST_CASE("make_dsm_batch determinism and shape") {
  const NoiseSchedule s;
  const MixtureTarget target = gaussian_1d(s, 0.0, 1.0);
  PretrainConfig cfg;
  cfg.batch = 32;
  cfg.seed = 11;
  const auto batch = make_dsm_batch(target, 1e-3, cfg, 2);
  REQUIRE(batch.size() == 32);
  const auto again = make_dsm_batch(target, 1e-3, cfg, 2);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    CHECK(batch[i].t == again[i].t);
    CHECK((batch[i].x_t - again[i].x_t).cwiseAbs().maxCoeff() == 0.0);
    CHECK((batch[i].eps - again[i].eps).cwiseAbs().maxCoeff() == 0.0);
    CHECK(batch[i].t >= 1e-3);
    CHECK(batch[i].t <= 1.0);
    CHECK(std::isfinite(batch[i].x_t(0)));
    CHECK(std::isfinite(batch[i].eps(0)));
  }
  CHECK_THROWS_AS(make_dsm_batch(target, 1.0, cfg, 0), std::invalid_argument);
}

TEST_CASE("dsm regression target gives zero loss") {
  const NoiseSchedule s;
  const MixtureTarget target = gaussian_1d(s, 0.0, 1.0);
  PretrainConfig cfg;
  cfg.batch = 16;
  cfg.seed = 3;
  const auto batch = make_dsm_batch(target, 1e-3, cfg, 0);

  // A net whose raw head reproduced eps exactly would have zero loss; the
  // loss definition is checked through the public pieces: score_forward maps
  // raw -> -raw / sqrt(1 - alpha), so stuff the oracle through dsm_batch_loss
  // by comparing against the direct mean-squared formula on a real net.
  ModelMeta meta;
  meta.schedule = s;
  ArchDescriptor arch;
  arch.kind = NetKind::Score;
  arch.dim = 1;
  arch.num_labels = 1;
  arch.width = 8;
  arch.depth = 1;
  arch.embed_dim = 2;
  arch.fourier = 1;
  Net net = Net::make_score(arch, meta, 8);

  // Fresh score net outputs 0, so the loss is mean ||eps||^2 / d.
  double expect = 0.0;
  for (const auto& smp : batch) expect += smp.eps.squaredNorm();
  expect /= static_cast<double>(batch.size());
  CHECK(dsm_batch_loss(net, batch) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("trained score net approaches the oracle score") {
  const NoiseSchedule s;
  const MixtureTarget target = gaussian_1d(s, 0.0, 1.0);

  ModelMeta meta;
  meta.schedule = s;
  ArchDescriptor arch;
  arch.kind = NetKind::Score;
  arch.dim = 1;
  arch.num_labels = 1;
  arch.width = 32;
  arch.depth = 2;
  arch.embed_dim = 8;
  arch.fourier = 4;
  Net net = Net::make_score(arch, meta, 77);

  PretrainConfig cfg;
  cfg.optimizer = OptimizerKind::Adam;
  cfg.batch = 256;
  cfg.iters = 15000;
  cfg.lr = 1e-3;
  cfg.seed = 1;
  const auto curve = pretrain_score(net, target, cfg, 0);
  CHECK(curve.front().loss > curve.back().loss);
  cfg.batch = 1024;
  cfg.iters = 10000;
  cfg.lr = 1e-4;
  cfg.seed = 2;
  pretrain_score(net, target, cfg, 0);

  // Max error over an (x, t) grid; the true score of N(0,1) is -x.  The score
  // head divides the raw output by sqrt(1 - alpha_t), which is ~3x at t = 0.1,
  // so the rarely-sampled |x| = 3 tail at the smallest t is excluded: accuracy
  // is pinned where the noisy marginal actually has mass.
  double worst = 0.0;
  for (int ti = 1; ti <= 10; ++ti) {
    const double t = 0.1 * ti;
    for (int xi = 0; xi <= 12; ++xi) {
      const double x = -3.0 + 0.5 * xi;
      if (t < 0.15 && std::abs(x) > 2.0) continue;
      const double got = net.score_forward(vec1(x), t, ConditionToken::label(0))(0);
      worst = std::max(worst, std::abs(got - (-x)));
    }
  }
  CHECK(worst <= 0.12);
}

TEST_SUITE_END();
