#include "sacnf/runner.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <filesystem>
#include <fstream>
#include <thread>

#include "sacnf/checkpoint.hpp"
#include "sacnf/metrics.hpp"

namespace sacnf {

namespace fs = std::filesystem;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

std::string trajectories_csv(const std::vector<EvalRecord>& evals) {
  std::string out = "env_step,episode,t,x,y\n";
  for (const EvalRecord& rec : evals)
    for (std::size_t e = 0; e < rec.trajectories.size(); ++e)
      for (std::size_t t = 0; t < rec.trajectories[e].size(); ++t) {
        const Eigen::Vector2d& p = rec.trajectories[e][t];
        out += std::to_string(rec.env_step) + "," + std::to_string(e) + "," + std::to_string(t) + "," +
               format_double(p.x()) + "," + format_double(p.y()) + "\n";
      }
  return out;
}

std::map<std::string, std::string> metadata(const ExperimentConfig& config, std::uint64_t seed, std::int64_t step) {
  return {{"env", config.env},
          {"seed", std::to_string(seed)},
          {"env_step", std::to_string(step)},
          {"noise_model", to_string(config.policy.noise)}};
}

}  // namespace

nlohmann::json params_json(const NFPolicy& policy) {
  return {{"mean", policy.mean_net.param_count()},
          {"scale", policy.scale_params().size()},
          {"flow", policy.flows.param_count()},
          {"total", policy.count_params()}};
}

RunResult run_seed(const ExperimentConfig& config, std::uint64_t seed) {
  const Environment env = Environment::from_name(config.env);
  const fs::path dir = fs::path(config.output_dir) / ("seed_" + std::to_string(seed));
  fs::create_directories(dir / "checkpoints");
  fs::remove(dir / "FAILED");
  write_text(dir / "config.txt", config.source);

  SacLearner<NFPolicy> learner = make_learner(config.policy, config.trainer, seed);
  write_text(dir / "params.json", params_json(learner.policy).dump(2) + "\n");

  TrainHooks hooks;
  hooks.on_checkpoint = [&](std::int64_t step) {
    save_checkpoint((dir / "checkpoints" / ("step_" + std::to_string(step) + ".ckpt")).string(),
                    make_checkpoint(learner.policy, &learner.critics, metadata(config, seed, step)));
  };

  RunResult result;
  result.seed = seed;
  result.directory = dir.string();
  result.log = train(learner, config.trainer, env, seed, hooks);

  write_metrics((dir / "metrics.csv").string(), result.log.rows);
  write_text(dir / "trajectories.csv", trajectories_csv(result.log.evals));
  const std::int64_t last_step = result.log.rows.empty() ? 0 : result.log.rows.back().env_step;
  save_checkpoint((dir / "checkpoints" / "final.ckpt").string(),
                  make_checkpoint(learner.policy, &learner.critics, metadata(config, seed, last_step)));

  if (!result.log.evals.empty()) {
    const EvalRecord& last = result.log.evals.back();
    double mean = 0.0;
    for (double r : last.returns) mean += r;
    result.final_eval_mean = mean / static_cast<double>(last.returns.size());
    if (env.spec().kind == EnvKind::deceptive)
      result.reached_goal = std::all_of(last.trajectories.begin(), last.trajectories.end(), [](const auto& path) {
        return (path.back() - deceptive_map::kGoalCenter).norm() <= deceptive_map::kGoalRadius;
      });
  }

  if (!result.log.failure.empty()) {
    write_text(dir / "FAILED", result.log.failure + "\n");
    return result;
  }
  if (config.analysis) {
    Rng rng = stream(seed, Stream::analysis);
    AnalysisReport report = analyze_policy(learner.policy, env, rng);
    report.run_id = "seed_" + std::to_string(seed);
    report.env_step = last_step;
    write_text(dir / "analysis.json", to_json(report).dump(2) + "\n");
    result.analysis = std::move(report);
  }
  return result;
}

std::vector<RunResult> run_experiment(const ExperimentConfig& config, int jobs) {
  if (jobs < 1) throw ConfigError("jobs must be at least 1");
  Environment::from_name(config.env);
  std::vector<RunResult> results(config.seeds.size());
  std::vector<std::exception_ptr> errors(config.seeds.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < config.seeds.size(); i = next++) {
      try {
        results[i] = run_seed(config, config.seeds[i]);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t n = std::min<std::size_t>(static_cast<std::size_t>(jobs), config.seeds.size());
  if (n <= 1) {
    worker();
  } else {
    std::vector<std::jthread> threads;
    for (std::size_t t = 0; t < n; ++t) threads.emplace_back(worker);
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return results;
}

}  // namespace sacnf
