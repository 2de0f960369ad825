#include <cmath>
#include <cstdio>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "sacnf/analysis.hpp"
#include "sacnf/checkpoint.hpp"
#include "sacnf/config.hpp"
#include "sacnf/envs.hpp"
#include "sacnf/runner.hpp"
#include "sacnf/trainer.hpp"

namespace {

using nlohmann::json;

void fail(const std::string& kind, const std::string& message) {
  std::cerr << json{{"error", kind}, {"message", message}}.dump() << std::endl;
}

json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

int cmd_train(const std::string& path, int jobs) {
  const sacnf::ExperimentConfig config = sacnf::load_config(path);
  const auto results = sacnf::run_experiment(config, jobs);
  int failures = 0;
  for (const auto& r : results) {
    failures += !r.log.failure.empty();
    std::cout << json{{"seed", r.seed},
                      {"directory", r.directory},
                      {"final_eval_mean", number(r.final_eval_mean)},
                      {"reached_goal", r.reached_goal},
                      {"failure", r.log.failure}}
                     .dump()
              << "\n";
  }
  return failures ? 3 : 0;
}

int cmd_eval(const std::string& checkpoint, const std::string& env_name, int episodes) {
  if (episodes < 1) throw sacnf::ConfigError("--episodes must be at least 1");
  const sacnf::Environment env = sacnf::Environment::from_name(env_name);
  const sacnf::NFPolicy policy = sacnf::policy_from_checkpoint(sacnf::load_checkpoint(checkpoint));
  const sacnf::EvalRecord rec = sacnf::evaluate(policy, env, episodes);
  double mean = 0.0;
  for (double r : rec.returns) mean += r;
  mean /= episodes;
  double var = 0.0;
  for (double r : rec.returns) var += (r - mean) * (r - mean);
  json out{{"env", env_name}, {"episodes", episodes}, {"returns", rec.returns},
           {"return_mean", mean}, {"return_std", std::sqrt(var / episodes)}, {"terminated", rec.terminated}};
  std::cout << out.dump(2) << "\n";
  return 0;
}

int cmd_analyze(const std::string& checkpoint, const std::string& env_name, std::uint64_t seed) {
  const sacnf::Environment env = sacnf::Environment::from_name(env_name);
  const sacnf::Checkpoint ck = sacnf::load_checkpoint(checkpoint);
  const sacnf::NFPolicy policy = sacnf::policy_from_checkpoint(ck);
  sacnf::Rng rng = sacnf::stream(seed, sacnf::Stream::analysis);
  sacnf::AnalysisReport report = sacnf::analyze_policy(policy, env, rng);
  report.run_id = checkpoint;
  if (auto it = ck.metadata.find("env_step"); it != ck.metadata.end()) report.env_step = std::stoll(it->second);
  std::cout << sacnf::to_json(report).dump(2) << "\n";
  return 0;
}

int cmd_reward_field(const std::string& env_name, const std::string& out, int resolution) {
  sacnf::write_reward_field(sacnf::Environment::from_name(env_name), out, resolution);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Soft actor-critic with normalizing-flow policies on 2-D navigation tasks"};
  app.require_subcommand(1);

  std::string config_path, checkpoint, env_name, out_path;
  int jobs = 1, episodes = 10, resolution = 121;
  std::uint64_t seed = 0;

  auto* train = app.add_subcommand("train", "Train every seed of an experiment config");
  train->add_option("config", config_path, "Experiment config file")->required();
  train->add_option("--jobs", jobs, "Seeds trained in parallel")->check(CLI::PositiveNumber);

  auto* eval = app.add_subcommand("eval", "Deterministic evaluation episodes of a checkpointed policy");
  eval->add_option("checkpoint", checkpoint, "Checkpoint file")->required();
  eval->add_option("env", env_name, "deceptive | four_goal | sparse")->required();
  eval->add_option("--episodes", episodes, "Number of episodes");

  auto* analyze = app.add_subcommand("analyze", "Shape analysis of a checkpointed policy");
  analyze->add_option("checkpoint", checkpoint, "Checkpoint file")->required();
  analyze->add_option("env", env_name, "deceptive | four_goal | sparse")->required();
  analyze->add_option("--seed", seed, "Seed of the analysis random stream");

  auto* field = app.add_subcommand("reward-field", "Write the reward map of an environment as x,y,r CSV");
  field->add_option("env", env_name, "deceptive | four_goal | sparse")->required();
  field->add_option("out", out_path, "Output CSV")->required();
  field->add_option("--resolution", resolution, "Grid points per axis");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    fail("usage", e.what());
    return 2;
  }

  try {
    if (*train) return cmd_train(config_path, jobs);
    if (*eval) return cmd_eval(checkpoint, env_name, episodes);
    if (*analyze) return cmd_analyze(checkpoint, env_name, seed);
    return cmd_reward_field(env_name, out_path, resolution);
  } catch (const sacnf::ConfigError& e) {
    fail("config", e.what());
  } catch (const sacnf::ShapeError& e) {
    fail("shape", e.what());
  } catch (const sacnf::CheckpointError& e) {
    fail("checkpoint", e.what());
  } catch (const sacnf::IoError& e) {
    fail("io", e.what());
  } catch (const sacnf::DegenerateSampleError& e) {
    fail("degenerate_sample", e.what());
  } catch (const std::exception& e) {
    fail("internal", e.what());
  }
  return 1;
}
