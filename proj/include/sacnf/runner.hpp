#pragma once

// Runs an experiment config once per seed. Each seed gets its own directory
// <output_dir>/seed_<s>/ holding
//
//   config.txt        the config text exactly as read
//   params.json       policy parameter count by group
//   metrics.csv       training and evaluation rows
//   trajectories.csv  evaluation paths: env_step,episode,t,x,y
//   checkpoints/      step_<n>.ckpt at the configured cadence, final.ckpt
//   analysis.json     shape analysis of the final policy (when enabled)
//   FAILED            present only when the run diverged; holds the reason

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sacnf/analysis.hpp"
#include "sacnf/config.hpp"
#include "sacnf/trainer.hpp"

namespace sacnf {

struct RunResult {
  std::uint64_t seed = 0;
  std::string directory;
  TrainingLog log;
  std::optional<AnalysisReport> analysis;
  double final_eval_mean = kNotRecorded;
  bool reached_goal = false;  // deceptive task: every episode of the last evaluation ended in the goal disk
};

RunResult run_seed(const ExperimentConfig& config, std::uint64_t seed);

// Seeds are independent and deterministic, so `jobs` > 1 runs them on worker
// threads without changing any output. Results are in seed-list order.
std::vector<RunResult> run_experiment(const ExperimentConfig& config, int jobs = 1);

nlohmann::json params_json(const NFPolicy& policy);

}  // namespace sacnf
