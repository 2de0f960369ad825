#pragma once

// Experiment configuration: a flat "key = value" text file. Lines starting
// with '#' and blank lines are ignored; lists are comma separated. Every key
// is checked against the schema, so a typo is an error rather than a silently
// ignored setting.
//
//   env               deceptive | four_goal | sparse        (required)
//   flow_family       radial | planar | none                (none = plain SAC)
//   flow_count        number of flow layers N >= 0
//   noise_model       conditional | average
//   policy_hidden     hidden widths of the policy network, e.g. 8 or 64,64
//   policy_activation tanh | relu
//   policy_mean_output tanh | identity: output of the mean head
//   critic_hidden     hidden widths of Q and V
//   critic_activation tanh | relu
//   alpha_ent         entropy temperature
//   gamma, tau        discount and Polyak rate
//   lr_theta lr_phi lr_v lr_q   Adam learning rates
//   batch_size        minibatch m
//   buffer_capacity   replay capacity (transitions)
//   total_env_steps   environment steps per run            (required)
//   warmup_steps      uniform-random steps before learning
//   updates_per_step  learning steps per environment step
//   eval_every        environment steps between evaluations (0 = never)
//   eval_episodes     deterministic episodes per evaluation
//   checkpoint_every  environment steps between checkpoints (0 = final only)
//   twin_q            true | false
//   divergence_threshold  loss magnitude that aborts a run
//   analysis          true | false: run the shape analysis at the end
//   seeds             list of integer seeds
//   output_dir        directory for per-seed artifacts

#include <cstdint>
#include <string>
#include <vector>

#include "sacnf/policy.hpp"
#include "sacnf/trainer.hpp"

namespace sacnf {

struct ExperimentConfig {
  std::string env;
  std::string flow_family = "radial";  // radial | planar | none
  int flow_count = 0;
  PolicyArchitecture policy;
  TrainerConfig trainer;
  bool analysis = true;
  std::vector<std::uint64_t> seeds{0};
  std::string output_dir = "runs";
  std::string source;  // text as read, echoed into every run directory
};

// Throws ConfigError naming the offending field.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);

}  // namespace sacnf
