#include "proxdiff/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <stdexcept>

#include "proxdiff/checkpoint.hpp"
#include "proxdiff/io.hpp"
#include "proxdiff/metrics.hpp"
#include "proxdiff/rng.hpp"

namespace proxdiff {

namespace {

namespace fs = std::filesystem;

enum : std::uint64_t {
  kStagePretrainProx = 1,
  kStagePretrainScore = 2,
  kStageReference = 3,
  kStageSample = 4,
  kStageGrpo = 5,
};

std::uint64_t stage_seed(std::uint64_t seed, std::uint64_t stage) {
  CounterRng rng({0x65787065u, seed, stage});
  return rng.next_u64();
}

std::vector<ConditionToken> all_labels(const MixtureTarget& target) {
  std::vector<ConditionToken> labels;
  for (int i = 0; i < target.num_labels(); ++i) labels.push_back(ConditionToken::label(i));
  return labels;
}

Eigen::MatrixXd stack_rows(const std::vector<Eigen::VectorXd>& rows) {
  if (rows.empty()) throw std::logic_error("stack_rows: empty");
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), rows.front().size());
  for (Eigen::Index i = 0; i < out.rows(); ++i) out.row(i) = rows[static_cast<std::size_t>(i)];
  return out;
}

double mean_reward_of(const std::vector<Eigen::VectorXd>& samples,
                      const std::vector<ConditionToken>& labels, const RewardFn& reward) {
  double total = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    total += reward(samples[i], labels[i % labels.size()]);
  }
  return total / static_cast<double>(samples.size());
}

RewardFn reward_by_name(const std::string& name, const MixtureTarget& target) {
  if (name == "mode-dist") return make_mode_distance_reward(target);
  if (name == "ring") return make_ring_reward(target);
  throw std::invalid_argument("unknown reward '" + name + "' (expected mode-dist or ring)");
}

std::string curve_csv(const std::vector<TrainPoint>& curve) {
  std::string out = "iteration,loss\n";
  for (const TrainPoint& p : curve) {
    out += std::to_string(p.iter) + "," + format_f64(p.loss) + "\n";
  }
  return out;
}

std::string grpo_csv(const std::vector<GrpoLogRow>& log) {
  std::string out = "update,mean_reward,mean_kl,clip_fraction\n";
  for (const GrpoLogRow& row : log) {
    out += std::to_string(row.update) + "," + format_f64(row.mean_reward) + "," +
           format_f64(row.mean_kl) + "," + format_f64(row.clip_fraction) + "\n";
  }
  return out;
}

struct MetricsRow {
  std::string sampler;
  int steps = 0;
  double omega = 0.0;
  std::uint64_t seed = 0;
  double energy = 0.0;
  double mean_reward = 0.0;
};

// Scoped wall-clock timer feeding timings.csv.
class StageClock {
 public:
  explicit StageClock(std::string* sink) : sink_(sink) {}

  template <typename F>
  void run(const std::string& name, std::uint64_t seed, F&& body) {
    const auto start = std::chrono::steady_clock::now();
    try {
      body();
    } catch (const std::exception& e) {
      throw std::runtime_error("stage " + name + " (seed " + std::to_string(seed) +
                               ") failed: " + e.what());
    }
    const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
    *sink_ += name + "," + std::to_string(seed) + "," + format_f64(elapsed.count()) + "\n";
  }

 private:
  std::string* sink_;
};

}  // namespace

StepRuleTag rule_from_string(const std::string& name) {
  if (name == "sde-euler") return StepRuleTag::SdeEuler;
  if (name == "ode-euler") return StepRuleTag::OdeEuler;
  if (name == "pda") return StepRuleTag::Pda;
  if (name == "pda-hybrid") return StepRuleTag::PdaHybrid;
  throw std::invalid_argument("unknown sampler '" + name +
                              "' (expected sde-euler, ode-euler, pda, or pda-hybrid)");
}

std::string rule_to_string(StepRuleTag tag) {
  switch (tag) {
    case StepRuleTag::SdeEuler: return "sde-euler";
    case StepRuleTag::OdeEuler: return "ode-euler";
    case StepRuleTag::Pda: return "pda";
    case StepRuleTag::PdaHybrid: return "pda-hybrid";
  }
  throw std::logic_error("rule_to_string: bad tag");
}

ExperimentConfig parse_experiment_config(ConfigMap cfg) {
  ExperimentConfig ec;
  ec.config_text = cfg.text();
  ec.experiment = cfg.get_string("experiment", "experiment");
  ec.out_dir = cfg.get_string("out_dir");
  ec.schedule.beta_min = cfg.get_double("beta_min", ec.schedule.beta_min);
  ec.schedule.beta_max = cfg.get_double("beta_max", ec.schedule.beta_max);
  ec.t_min = cfg.get_double("t_min", ec.t_min);
  ec.target = parse_target_spec(cfg);

  ec.sweep_steps = cfg.get_int_list("steps", ec.sweep_steps);
  ec.samplers = cfg.get_string_list("samplers", ec.samplers);
  for (const std::string& name : ec.samplers) rule_from_string(name);  // validate early
  ec.omegas = cfg.get_double_list("omegas", ec.omegas);
  ec.seeds = cfg.get_u64_list("seeds", ec.seeds);
  ec.sample_n = cfg.get_int("sample_n", ec.sample_n);
  ec.reference_n = cfg.get_int("reference_n", ec.sample_n);
  if (ec.sample_n < 2 || ec.reference_n < 2) {
    throw std::invalid_argument("sample_n and reference_n must be >= 2");
  }

  ec.arch.width = cfg.get_int("width", ec.arch.width);
  ec.arch.depth = cfg.get_int("depth", ec.arch.depth);
  ec.arch.embed_dim = cfg.get_int("embed_dim", ec.arch.embed_dim);
  ec.arch.fourier = cfg.get_int("fourier", ec.arch.fourier);
  ec.step_grid = cfg.get_int_list("step_grid", ec.step_grid);

  ec.pretrain.zeta = cfg.get_double("zeta", ec.pretrain.zeta);
  ec.pretrain.p_null = cfg.get_double("p_null", ec.pretrain.p_null);
  ec.pretrain.batch = cfg.get_int("batch", ec.pretrain.batch);
  ec.pretrain.iters = cfg.get_int("iters", ec.pretrain.iters);
  ec.pretrain.lr = cfg.get_double("lr", ec.pretrain.lr);
  ec.pretrain.momentum = cfg.get_double("momentum", ec.pretrain.momentum);
  ec.pretrain.optimizer = optimizer_from_string(cfg.get_string("optimizer", "sgd"));
  ec.score_iters = cfg.get_int("score.iters", 0);
  ec.score_lr = cfg.get_double("score.lr", 0.0);
  ec.train_score = cfg.get_bool("train_score", ec.train_score);
  for (const std::string& name : ec.samplers) {
    if (!StepRule{rule_from_string(name), 0.0}.is_prox() && !ec.train_score) {
      throw std::invalid_argument("sampler '" + name + "' needs train_score = true");
    }
  }

  ec.grpo_enabled = cfg.get_bool("grpo.enabled", false);
  ec.grpo.group = cfg.get_int("grpo.group", ec.grpo.group);
  ec.grpo.steps = cfg.get_int("grpo.steps", ec.grpo.steps);
  ec.grpo.beta_kl = cfg.get_double("grpo.kl", ec.grpo.beta_kl);
  ec.grpo.clip = cfg.get_double("grpo.clip", ec.grpo.clip);
  ec.grpo.omega = cfg.get_double("grpo.omega", ec.grpo.omega);
  ec.grpo.lr = cfg.get_double("grpo.lr", ec.grpo.lr);
  ec.grpo.momentum = cfg.get_double("grpo.momentum", ec.grpo.momentum);
  ec.grpo.optimizer = optimizer_from_string(cfg.get_string("grpo.optimizer", "sgd"));
  ec.grpo.updates = cfg.get_int("grpo.updates", ec.grpo.updates);
  ec.grpo.prompts_per_batch = cfg.get_int("grpo.prompts_per_batch", ec.grpo.prompts_per_batch);
  ec.grpo.accum_chunks = cfg.get_int("grpo.accum_chunks", ec.grpo.accum_chunks);
  ec.grpo.inner_epochs = cfg.get_int("grpo.inner_epochs", ec.grpo.inner_epochs);
  ec.grpo_reward = cfg.get_string("grpo.reward", ec.grpo_reward);
  ec.grpo_prompts = cfg.get_int_list("grpo.prompts", ec.grpo_prompts);
  ec.grpo_init_checkpoint = cfg.get_string("grpo.init_checkpoint", "");
  for (int id : ec.grpo_prompts) {
    if (id < 0 || id >= static_cast<int>(ec.target.per_label.size())) {
      throw std::invalid_argument("grpo.prompts: label " + std::to_string(id) +
                                  " outside target.labels");
    }
  }

  cfg.ensure_consumed();
  return ec;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  return parse_experiment_config(ConfigMap::from_file(path));
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  const fs::path root(cfg.out_dir);
  fs::create_directories(root / "samples");
  fs::create_directories(root / "checkpoints");
  fs::create_directories(root / "curves");

  const MixtureTarget target = cfg.target.build(cfg.schedule);
  const std::vector<ConditionToken> labels = all_labels(target);
  const StepGridSet gridset(cfg.schedule, cfg.t_min, cfg.step_grid);
  ArchDescriptor arch = cfg.arch;
  arch.dim = target.dim();
  arch.num_labels = target.num_labels();
  const ModelMeta meta{cfg.schedule, cfg.t_min, cfg.step_grid};
  const RewardFn metric_reward = make_mode_distance_reward(target);

  ExperimentResult result;
  result.out_dir = cfg.out_dir;
  std::string timings = "stage,seed,seconds\n";
  StageClock clock(&timings);
  std::vector<MetricsRow> rows;

  auto emit = [&](const std::string& rel, const std::string& content) {
    write_text_file((root / rel).string(), content);
    result.files.push_back(rel);
  };
  auto emit_checkpoint = [&](const std::string& rel, const Net& net) {
    save_checkpoint(net, (root / rel).string());
    result.files.push_back(rel);
  };
  auto emit_samples = [&](const std::string& rel, const Eigen::MatrixXd& m) {
    write_sample_csv((root / rel).string(), m);
    result.files.push_back(rel);
  };

  // sampler_tag names the metrics row and sample file; rule_name picks the
  // update rule (the GRPO resample reuses pda-hybrid under its own tag).
  auto sweep_cell = [&](const Net& net, const std::string& rule_name,
                        const std::string& sampler_tag, int steps, double omega,
                        std::uint64_t seed, const Eigen::MatrixXd& reference) {
    const StepRule rule{rule_from_string(rule_name), omega};
    const TimeGrid grid = make_time_grid(cfg.schedule, steps, cfg.t_min);
    const std::vector<Eigen::VectorXd> samples =
        sample_batch(rule, grid, target.dim(), net_fns(net), labels, cfg.sample_n,
                     stage_seed(seed, kStageSample));
    const Eigen::MatrixXd mat = stack_rows(samples);
    const std::string tag = sampler_tag + "_K" + std::to_string(steps) + "_w" +
                            format_f64(omega) + "_s" + std::to_string(seed);
    emit_samples("samples/" + tag + ".csv", mat);
    MetricsRow row;
    row.sampler = sampler_tag;
    row.steps = steps;
    row.omega = omega;
    row.seed = seed;
    row.energy = energy_distance(mat, reference);
    row.mean_reward = mean_reward_of(samples, labels, metric_reward);
    rows.push_back(row);
  };

  for (const std::uint64_t seed : cfg.seeds) {
    const std::string s = std::to_string(seed);

    Net prox_net = Net::make_prox(arch, meta, stage_seed(seed, kStagePretrainProx));
    clock.run("pretrain-prox", seed, [&] {
      PretrainConfig pcfg = cfg.pretrain;
      pcfg.seed = stage_seed(seed, kStagePretrainProx) + 1;
      const auto curve = pretrain_prox(prox_net, target, gridset, pcfg);
      emit("curves/pretrain-prox_s" + s + ".csv", curve_csv(curve));
      emit_checkpoint("checkpoints/pretrain-prox_s" + s + ".ckpt", prox_net);
    });

    Net score_net = Net::make_score(arch, meta, stage_seed(seed, kStagePretrainScore));
    if (cfg.train_score) {
      clock.run("pretrain-score", seed, [&] {
        PretrainConfig pcfg = cfg.pretrain;
        pcfg.seed = stage_seed(seed, kStagePretrainScore) + 1;
        if (cfg.score_iters > 0) pcfg.iters = cfg.score_iters;
        if (cfg.score_lr > 0.0) pcfg.lr = cfg.score_lr;
        const auto curve = pretrain_score(score_net, target, pcfg);
        emit("curves/pretrain-score_s" + s + ".csv", curve_csv(curve));
        emit_checkpoint("checkpoints/pretrain-score_s" + s + ".ckpt", score_net);
      });
    }

    Eigen::MatrixXd reference;
    clock.run("reference", seed, [&] {
      CounterRng rng({stage_seed(seed, kStageReference)});
      std::vector<Eigen::VectorXd> draws;
      draws.reserve(static_cast<std::size_t>(cfg.reference_n));
      for (int i = 0; i < cfg.reference_n; ++i) {
        draws.push_back(target.sample(labels[static_cast<std::size_t>(i) % labels.size()], rng));
      }
      reference = stack_rows(draws);
      emit_samples("samples/target_s" + s + ".csv", reference);
    });

    clock.run("sample", seed, [&] {
      for (const std::string& sampler_name : cfg.samplers) {
        const bool prox_rule = StepRule{rule_from_string(sampler_name), 0.0}.is_prox();
        for (const int steps : cfg.sweep_steps) {
          for (const double omega : cfg.omegas) {
            sweep_cell(prox_rule ? prox_net : score_net, sampler_name, sampler_name, steps,
                       omega, seed, reference);
          }
        }
      }
    });

    if (cfg.grpo_enabled) {
      clock.run("grpo", seed, [&] {
        Net tuned = cfg.grpo_init_checkpoint.empty()
                        ? prox_net.snapshot()
                        : load_checkpoint_expect(cfg.grpo_init_checkpoint, NetKind::Prox);
        std::vector<ConditionToken> prompts;
        if (cfg.grpo_prompts.empty()) {
          prompts = labels;
        } else {
          for (int id : cfg.grpo_prompts) prompts.push_back(ConditionToken::label(id));
        }
        GRPOConfig gcfg = cfg.grpo;
        gcfg.seed = stage_seed(seed, kStageGrpo);
        const auto log =
            grpo_update_loop(tuned, prompts, gcfg, reward_by_name(cfg.grpo_reward, target));
        emit("curves/grpo_s" + s + ".csv", grpo_csv(log));
        emit_checkpoint("checkpoints/grpo_s" + s + ".ckpt", tuned);
        for (const int steps : cfg.sweep_steps) {
          sweep_cell(tuned, "pda-hybrid", "pda-hybrid-grpo", steps, gcfg.omega, seed,
                     reference);
        }
      });
    }
  }

  std::string metrics = "experiment,sampler,steps,omega,seed,energy_distance,mean_reward\n";
  for (const MetricsRow& row : rows) {
    metrics += cfg.experiment + "," + row.sampler + "," + std::to_string(row.steps) + "," +
               format_f64(row.omega) + "," + std::to_string(row.seed) + "," +
               format_f64(row.energy) + "," + format_f64(row.mean_reward) + "\n";
  }
  emit("metrics.csv", metrics);
  emit("timings.csv", timings);

  std::sort(result.files.begin(), result.files.end());
  std::string manifest = "== config ==\n" + cfg.config_text;
  if (!manifest.empty() && manifest.back() != '\n') manifest += '\n';
  manifest += "== files ==\n";
  for (const std::string& rel : result.files) {
    char hex[17];
    std::snprintf(hex, sizeof(hex), "%016llx",
                  static_cast<unsigned long long>(fnv1a64_file((root / rel).string())));
    manifest += std::string(hex) + "  " + rel + "\n";
  }
  write_text_file((root / "manifest.txt").string(), manifest);
  result.files.push_back("manifest.txt");
  return result;
}

}  // namespace proxdiff
