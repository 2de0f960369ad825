#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "sacnf/adam.hpp"
#include "sacnf/envs.hpp"
#include "sacnf/gaussian_policy.hpp"
#include "sacnf/policy.hpp"
#include "sacnf/replay_buffer.hpp"
#include "sacnf/sac.hpp"
#include "sacnf/tape.hpp"

namespace sacnf {

struct TrainerConfig {
  double alpha_ent = 0.05;
  double gamma = 0.99;
  double tau = 0.005;
  double lr_theta = 3e-4;
  double lr_phi = 3e-4;
  double lr_v = 3e-4;
  double lr_q = 3e-4;
  int batch_size = 256;
  std::size_t buffer_capacity = 1'000'000;
  std::int64_t total_env_steps = 0;
  std::int64_t warmup_steps = 1000;  // uniform random actions before learning starts
  int updates_per_step = 1;
  std::int64_t eval_every = 1000;
  int eval_episodes = 10;
  std::vector<int> critic_hidden{64, 64};
  Activation critic_activation = Activation::relu;
  bool twin_q = false;
  std::int64_t checkpoint_every = 0;  // 0 disables
  double divergence_threshold = 1e6;
  double action_limit = 1.0;  // symmetric action box of the environments
};

enum class UpdatePhase { value, critic, policy_base, policy_flow, target };

struct StepLosses {
  double q = 0.0;
  double v = 0.0;
  double pi = 0.0;
  double entropy = 0.0;
};

inline constexpr double kNotRecorded = std::numeric_limits<double>::quiet_NaN();

// One metrics row. Training rows close an episode; evaluation rows carry the
// evaluation statistics. Fields that do not apply are NaN.
struct LogRow {
  std::int64_t env_step = 0;
  std::int64_t episode = 0;
  double train_return = kNotRecorded;
  double eval_return_mean = kNotRecorded;
  double eval_return_std = kNotRecorded;
  double loss_q = kNotRecorded;
  double loss_v = kNotRecorded;
  double loss_pi = kNotRecorded;
  double policy_entropy_mc = kNotRecorded;
};

struct EvalRecord {
  std::int64_t env_step = 0;
  std::vector<double> returns;
  std::vector<std::vector<Eigen::Vector2d>> trajectories;  // positions including the start
  std::vector<bool> terminated;                             // ended in an absorbing region
};

struct TrainingLog {
  std::vector<LogRow> rows;
  std::vector<StepLosses> step_losses;  // one entry per learning step
  std::vector<EvalRecord> evals;
  std::string failure;  // empty unless the divergence guard fired
};

// Loss value and gradient for one parameter group.
struct GroupGradient {
  double loss = 0.0;
  std::vector<double> grad;
};

struct PolicyGradient {
  double loss = 0.0;
  double entropy = 0.0;
  std::vector<double> mean;
  std::vector<double> scale;
  std::vector<double> flow;
};

template <class Policy>
class SacLearner {
 public:
  SacLearner(Policy policy, CriticPair critics, const TrainerConfig& config);

  // V, Q, base policy (theta), flows (phi), then the Polyak target, in that
  // order. `after` is invoked once each phase has applied its update. Throws
  // TrainingDiverged when a loss leaves the finite range or exceeds the
  // configured threshold.
  StepLosses update(std::span<const Transition> batch, Rng& noise_rng,
                    const std::function<void(UpdatePhase)>& after = {});

  // Gradients at the current parameters, without applying them. Network
  // bodies run batched; the policy head runs on the tape. `noise` holds one
  // base-noise vector per transition.
  GroupGradient value_gradient(std::span<const Transition> batch, std::span<const std::vector<double>> noise);
  GroupGradient critic_gradient(std::span<const Transition> batch, const DenseNet& q);
  PolicyGradient policy_gradient(std::span<const Transition> batch, std::span<const std::vector<double>> noise);

  const TrainerConfig& config() const { return config_; }

  Policy policy;
  CriticPair critics;
  AdamState adam_v, adam_q, adam_q2, adam_mean, adam_scale, adam_flow;

 private:
  void guard(double loss, const char* name) const;

  TrainerConfig config_;
  Tape tape_;
};

struct TrainHooks {
  std::function<void(std::int64_t env_step)> on_checkpoint;
};

// Runs the actor-critic loop: collect one environment step, then
// `updates_per_step` learning steps once warmup is over and the buffer holds a
// minibatch; evaluate deterministically every `eval_every` steps.
template <class Policy>
TrainingLog train(SacLearner<Policy>& learner, const TrainerConfig& config, const Environment& env,
                  std::uint64_t seed, const TrainHooks& hooks = {});

// Deterministic-action episodes from the start state.
template <class Policy>
EvalRecord evaluate(const Policy& policy, const Environment& env, int episodes, std::int64_t env_step = 0);

// Stochastic rollouts; returns the final position of each.
template <class Policy>
std::vector<Eigen::Vector2d> stochastic_terminal_positions(const Policy& policy, const Environment& env, int rollouts,
                                                           Rng& rng);

// Fresh learner with seeded initialization from the `init` stream.
SacLearner<NFPolicy> make_learner(const PolicyArchitecture& arch, const TrainerConfig& config, std::uint64_t seed);

extern template class SacLearner<NFPolicy>;
extern template class SacLearner<GaussianPolicy>;

}  // namespace sacnf
