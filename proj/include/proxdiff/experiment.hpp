#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "proxdiff/config.hpp"
#include "proxdiff/grpo.hpp"
#include "proxdiff/net.hpp"
#include "proxdiff/pretrain.hpp"
#include "proxdiff/samplers.hpp"
#include "proxdiff/schedule.hpp"

namespace proxdiff {

StepRuleTag rule_from_string(const std::string& name);  // "sde-euler" etc.
std::string rule_to_string(StepRuleTag tag);

// Everything run_experiment needs, parsed from one flat config file. See
// parse_experiment_config for the key list.
struct ExperimentConfig {
  std::string experiment = "experiment";  // id column in metrics.csv
  std::string out_dir;
  NoiseSchedule schedule;
  double t_min = 1e-3;
  TargetSpec target;

  std::vector<int> sweep_steps{4, 10};                     // `steps`
  std::vector<std::string> samplers{"pda-hybrid", "sde-euler"};
  std::vector<double> omegas{0.0};
  std::vector<std::uint64_t> seeds{1};
  int sample_n = 4096;     // chains per sweep cell
  int reference_n = 4096;  // oracle draws the energy distance compares against

  ArchDescriptor arch;  // width/depth/embed_dim/fourier; dim and labels follow the target
  std::vector<int> step_grid = StepGridSet::default_counts();
  PretrainConfig pretrain;
  int score_iters = 0;    // 0 = same as pretrain.iters
  double score_lr = 0.0;  // 0 = same as pretrain.lr
  bool train_score = true;

  bool grpo_enabled = false;
  GRPOConfig grpo;
  std::string grpo_reward = "mode-dist";  // or "ring"
  std::vector<int> grpo_prompts;          // label ids; empty = all labels
  std::string grpo_init_checkpoint;       // empty = the prox net trained in this run

  std::string config_text;  // verbatim echo for the manifest
};

// Parses and validates; consumes every key and rejects unknown ones.
ExperimentConfig parse_experiment_config(ConfigMap cfg);
ExperimentConfig load_experiment_config(const std::string& path);

struct ExperimentResult {
  std::string out_dir;
  std::vector<std::string> files;  // relative paths in manifest order
};

// Staged pipeline: per seed, pretrain prox (and score) nets, sample sweeps
// over (sampler, K, omega), optionally GRPO fine-tune and resample. Writes
// metrics.csv (deterministic), timings.csv (wall clock, not covered by the
// determinism guarantee), samples/<tag>.csv, checkpoints/<stage>.ckpt,
// curves/<stage>.csv, and manifest.txt echoing the config verbatim and
// listing every written file with its checksum. Any stage failure is
// rethrown as std::runtime_error naming the stage and seed.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

}  // namespace proxdiff
