#include "sacnf/trainer.hpp"

#include <cmath>
#include <string>

#include "sacnf/batch_net.hpp"

namespace sacnf {

namespace {

template <class Policy>
std::span<double> flow_params(Policy& policy) {
  if constexpr (requires { policy.flows; }) return policy.flows.params;
  else return {};
}

// Rows are features, columns are samples.
Eigen::MatrixXd stack(std::span<const Transition> batch, std::vector<double> Transition::*field) {
  const auto rows = static_cast<Eigen::Index>((batch.front().*field).size());
  Eigen::MatrixXd out(rows, static_cast<Eigen::Index>(batch.size()));
  for (std::size_t i = 0; i < batch.size(); ++i)
    out.col(static_cast<Eigen::Index>(i)) = Eigen::Map<const Eigen::VectorXd>((batch[i].*field).data(), rows);
  return out;
}

Eigen::MatrixXd vstack(const Eigen::MatrixXd& top, const Eigen::MatrixXd& bottom) {
  Eigen::MatrixXd out(top.rows() + bottom.rows(), top.cols());
  out << top, bottom;
  return out;
}

void check_finite_batch(const Eigen::MatrixXd& m, const char* head) {
  if (!m.allFinite()) throw NumericError(std::string("non-finite output from ") + head);
}

// Raw log-scale head output for the batch, one column per sample.
template <class Policy>
Eigen::MatrixXd log_scale_batch(const Policy& policy, const Eigen::MatrixXd& states, BatchCache* cache) {
  if (policy.noise_model() == NoiseModel::conditional) {
    Eigen::MatrixXd ls = batch_forward(policy.scale_net, states, cache);
    check_finite_batch(ls, "policy.scale");
    return ls;
  }
  const Eigen::Map<const Eigen::VectorXd> ls(policy.log_scale.data(), static_cast<Eigen::Index>(policy.log_scale.size()));
  return ls.replicate(1, states.cols());
}

std::span<const double> column(const Eigen::MatrixXd& m, Eigen::Index j) {
  return {m.col(j).data(), static_cast<std::size_t>(m.rows())};
}

}  // namespace

template <class Policy>
SacLearner<Policy>::SacLearner(Policy p, CriticPair c, const TrainerConfig& config)
    : policy(std::move(p)), critics(std::move(c)), config_(config) {
  adam_v = AdamState({config.lr_v}, critics.v.param_count());
  adam_q = AdamState({config.lr_q}, critics.q.param_count());
  if (critics.q2) adam_q2 = AdamState({config.lr_q}, critics.q2->param_count());
  adam_mean = AdamState({config.lr_theta}, policy.mean_net.param_count());
  adam_scale = AdamState({config.lr_theta}, policy.scale_params().size());
  adam_flow = AdamState({config.lr_phi}, flow_params(policy).size());
}

template <class Policy>
void SacLearner<Policy>::guard(double loss, const char* name) const {
  if (!std::isfinite(loss) || std::abs(loss) > config_.divergence_threshold)
    throw TrainingDiverged(std::string("divergence: ") + name + " loss = " + std::to_string(loss));
}

template <class Policy>
GroupGradient SacLearner<Policy>::value_gradient(std::span<const Transition> batch,
                                                 std::span<const std::vector<double>> noise) {
  const Eigen::MatrixXd states = stack(batch, &Transition::state);
  const auto m = states.cols();
  const Eigen::MatrixXd mu = batch_forward(policy.mean_net, states);
  check_finite_batch(mu, "policy.mu");
  const Eigen::MatrixXd ls = log_scale_batch(policy, states, nullptr);

  Eigen::MatrixXd actions(mu.rows(), m);
  Eigen::VectorXd log_prob(m);
  const std::span<const double> flow = flow_params(policy);
  for (Eigen::Index j = 0; j < m; ++j) {
    const auto draw = policy.template sample_from_base<double>(column(mu, j), column(ls, j), flow, noise[j]);
    actions.col(j) = Eigen::Map<const Eigen::VectorXd>(draw.action.data(), mu.rows())
                         .cwiseMax(-critics.action_limit)
                         .cwiseMin(critics.action_limit);
    log_prob(j) = draw.log_prob;
  }
  const Eigen::MatrixXd sa = vstack(states, actions);
  Eigen::RowVectorXd q = batch_forward(critics.q, sa);
  if (critics.q2) q = q.cwiseMin(batch_forward(*critics.q2, sa));
  const Eigen::RowVectorXd target = q - config_.alpha_ent * log_prob.transpose();

  BatchCache cache;
  const Eigen::RowVectorXd residual = batch_forward(critics.v, states, &cache) - target;
  GroupGradient out;
  out.loss = 0.5 * residual.squaredNorm() / static_cast<double>(m);
  out.grad.assign(critics.v.param_count(), 0.0);
  batch_backward(critics.v, critics.v.params, cache, residual / static_cast<double>(m), out.grad);
  return out;
}

template <class Policy>
GroupGradient SacLearner<Policy>::critic_gradient(std::span<const Transition> batch, const DenseNet& q) {
  const Eigen::MatrixXd next = stack(batch, &Transition::next_state);
  const Eigen::RowVectorXd bootstrap = batch_forward(critics.v_target, next);
  const auto m = next.cols();
  Eigen::RowVectorXd target(m);
  for (Eigen::Index j = 0; j < m; ++j)
    target(j) = batch[j].reward + config_.gamma * (batch[j].done ? 0.0 : bootstrap(j));

  const Eigen::MatrixXd sa = vstack(stack(batch, &Transition::state), stack(batch, &Transition::action));
  BatchCache cache;
  const Eigen::RowVectorXd residual = batch_forward(q, sa, &cache) - target;
  GroupGradient out;
  out.loss = 0.5 * residual.squaredNorm() / static_cast<double>(m);
  out.grad.assign(q.param_count(), 0.0);
  batch_backward(q, q.params, cache, residual / static_cast<double>(m), out.grad);
  return out;
}

template <class Policy>
PolicyGradient SacLearner<Policy>::policy_gradient(std::span<const Transition> batch,
                                                   std::span<const std::vector<double>> noise) {
  const Eigen::MatrixXd states = stack(batch, &Transition::state);
  const auto m = states.cols();
  const auto d = static_cast<Eigen::Index>(policy.action_dim());
  const bool conditional = policy.noise_model() == NoiseModel::conditional;

  BatchCache mean_cache, scale_cache;
  const Eigen::MatrixXd mu = batch_forward(policy.mean_net, states, &mean_cache);
  check_finite_batch(mu, "policy.mu");
  const Eigen::MatrixXd ls = log_scale_batch(policy, states, &scale_cache);

  // Per-sample head on the tape. Flow parameters and the free log-scale
  // vector are shared leaves; network outputs are per-sample leaves.
  tape_.clear();
  const auto flow_leaves = tape_.leaves(flow_params(policy));
  std::vector<Var> shared_ls;
  if (!conditional) shared_ls = tape_.leaves(policy.log_scale);
  std::vector<std::vector<Var>> mu_leaves(m), ls_leaves(m);
  std::vector<ActionSample<Var>> draws;
  draws.reserve(m);
  Eigen::MatrixXd actions(d, m);
  for (Eigen::Index j = 0; j < m; ++j) {
    mu_leaves[j] = tape_.leaves(column(mu, j));
    if (conditional) ls_leaves[j] = tape_.leaves(column(ls, j));
    const std::span<const Var> ls_j = conditional ? std::span<const Var>(ls_leaves[j]) : std::span<const Var>(shared_ls);
    draws.push_back(policy.template sample_from_base<Var>(mu_leaves[j], ls_j, flow_leaves, noise[j]));
    for (Eigen::Index k = 0; k < d; ++k)
      actions(k, j) = clamp(draws.back().action[k].value(), -critics.action_limit, critics.action_limit);
  }

  // Critic value and its action gradient, batched; enters the tape as one
  // node linear in the actions.
  const Eigen::MatrixXd sa = vstack(states, actions);
  BatchCache q_cache;
  Eigen::RowVectorXd q = batch_forward(critics.q, sa, &q_cache);
  Eigen::MatrixXd dq = batch_backward(critics.q, critics.q.params, q_cache, Eigen::RowVectorXd::Ones(m), {});
  if (critics.q2) {
    BatchCache q2_cache;
    const Eigen::RowVectorXd q2 = batch_forward(*critics.q2, sa, &q2_cache);
    const Eigen::MatrixXd dq2 =
        batch_backward(*critics.q2, critics.q2->params, q2_cache, Eigen::RowVectorXd::Ones(m), {});
    for (Eigen::Index j = 0; j < m; ++j)
      if (q2(j) < q(j)) {
        q(j) = q2(j);
        dq.col(j) = dq2.col(j);
      }
  }

  const double inv_m = 1.0 / static_cast<double>(m);
  double value = 0.0;
  double log_prob_sum = 0.0;
  for (Eigen::Index j = 0; j < m; ++j) {
    const Var lp = draws[j].log_prob;
    log_prob_sum += lp.value();
    value += config_.alpha_ent * lp.value() - q(j);
    tape_.edge(lp, config_.alpha_ent * inv_m);
    for (Eigen::Index k = 0; k < d; ++k) {
      // the clip passes gradient only inside the limits (boundary included)
      const double a = draws[j].action[k].value();
      if (a >= -critics.action_limit && a <= critics.action_limit)
        tape_.edge(draws[j].action[k], -dq(states.rows() + k, j) * inv_m);
    }
  }
  const Var loss = tape_.finish(value * inv_m);
  tape_.backward(loss);

  PolicyGradient out;
  out.loss = loss.value();
  out.entropy = -log_prob_sum * inv_m;
  out.flow = tape_.gradient(flow_leaves);

  Eigen::MatrixXd g_mu(d, m), g_ls(d, m);
  for (Eigen::Index j = 0; j < m; ++j)
    for (Eigen::Index k = 0; k < d; ++k) {
      g_mu(k, j) = tape_.adjoint(mu_leaves[j][k]);
      if (conditional) g_ls(k, j) = tape_.adjoint(ls_leaves[j][k]);
    }
  out.mean.assign(policy.mean_net.param_count(), 0.0);
  batch_backward(policy.mean_net, policy.mean_net.params, mean_cache, g_mu, out.mean);
  if (conditional) {
    out.scale.assign(policy.scale_net.param_count(), 0.0);
    batch_backward(policy.scale_net, policy.scale_net.params, scale_cache, g_ls, out.scale);
  } else {
    out.scale = tape_.gradient(shared_ls);
  }
  return out;
}

template <class Policy>
StepLosses SacLearner<Policy>::update(std::span<const Transition> batch, Rng& noise_rng,
                                      const std::function<void(UpdatePhase)>& after) {
  StepLosses out;
  const int d = policy.action_dim();
  auto notify = [&](UpdatePhase phase) {
    if (after) after(phase);
  };

  {
    const auto noise = draw_batch_noise(noise_rng, batch.size(), d);
    const GroupGradient g = value_gradient(batch, noise);
    out.v = g.loss;
    guard(out.v, "value");
    adam_step(adam_v, critics.v.params, g.grad);
    notify(UpdatePhase::value);
  }
  {
    const GroupGradient g = critic_gradient(batch, critics.q);
    out.q = g.loss;
    guard(out.q, "critic");
    if (critics.q2) {
      const GroupGradient g2 = critic_gradient(batch, *critics.q2);
      guard(g2.loss, "critic2");
      adam_step(adam_q2, critics.q2->params, g2.grad);
    }
    adam_step(adam_q, critics.q.params, g.grad);
    notify(UpdatePhase::critic);
  }
  {
    // theta and phi gradients are taken at the same point, then applied in turn.
    const auto noise = draw_batch_noise(noise_rng, batch.size(), d);
    const PolicyGradient g = policy_gradient(batch, noise);
    out.pi = g.loss;
    out.entropy = g.entropy;
    guard(out.pi, "policy");
    adam_step(adam_mean, policy.mean_net.params, g.mean);
    adam_step(adam_scale, policy.scale_params(), g.scale);
    notify(UpdatePhase::policy_base);
    adam_step(adam_flow, flow_params(policy), g.flow);
    notify(UpdatePhase::policy_flow);
  }
  polyak_update(critics.v_target, critics.v, config_.tau);
  notify(UpdatePhase::target);
  return out;
}

template <class Policy>
EvalRecord evaluate(const Policy& policy, const Environment& env, int episodes, std::int64_t env_step) {
  EvalRecord rec;
  rec.env_step = env_step;
  for (int e = 0; e < episodes; ++e) {
    PointState s = env.reset();
    std::vector<Eigen::Vector2d> path{s.position};
    double ret = 0.0;
    bool terminal = false;
    for (;;) {
      const auto a = policy.deterministic_action(env.observe(s));
      const StepResult r = env.step(s, a);
      ret += r.reward;
      s = r.state;
      path.push_back(s.position);
      if (r.done()) {
        terminal = r.terminal;
        break;
      }
    }
    rec.returns.push_back(ret);
    rec.trajectories.push_back(std::move(path));
    rec.terminated.push_back(terminal);
  }
  return rec;
}

template <class Policy>
std::vector<Eigen::Vector2d> stochastic_terminal_positions(const Policy& policy, const Environment& env, int rollouts,
                                                           Rng& rng) {
  std::vector<Eigen::Vector2d> out;
  out.reserve(rollouts);
  for (int e = 0; e < rollouts; ++e) {
    PointState s = env.reset(rng);
    for (;;) {
      const auto draw = policy.sample_action(env.observe(s), rng);
      const StepResult r = env.step(s, draw.action);
      s = r.state;
      if (r.done()) break;
    }
    out.push_back(s.position);
  }
  return out;
}

namespace {

struct LossAccumulator {
  StepLosses sum;
  int count = 0;

  void add(const StepLosses& l) {
    sum.q += l.q;
    sum.v += l.v;
    sum.pi += l.pi;
    sum.entropy += l.entropy;
    ++count;
  }
  void fill(LogRow& row) {
    if (count > 0) {
      row.loss_q = sum.q / count;
      row.loss_v = sum.v / count;
      row.loss_pi = sum.pi / count;
      row.policy_entropy_mc = sum.entropy / count;
    }
    *this = {};
  }
};

}  // namespace

template <class Policy>
TrainingLog train(SacLearner<Policy>& learner, const TrainerConfig& config, const Environment& env, std::uint64_t seed,
                  const TrainHooks& hooks) {
  TrainingLog log;
  const double limit = learner.critics.action_limit;
  if (env.spec().action_low != -limit || env.spec().action_high != limit)
    throw ConfigError("critic action limit does not match the environment's action bounds");
  if (config.total_env_steps <= 0) return log;

  Rng env_rng = stream(seed, Stream::env);
  Rng noise_rng = stream(seed, Stream::policy_noise);
  Rng replay_rng = stream(seed, Stream::replay);
  Rng warmup_rng = stream(seed, Stream::warmup);

  ReplayBuffer buffer(config.buffer_capacity, env.observation_dim(), env.action_dim());
  LossAccumulator losses;
  PointState state = env.reset(env_rng);
  double episode_return = 0.0;
  std::int64_t episode = 0;

  try {
    for (std::int64_t step = 0; step < config.total_env_steps; ++step) {
      const std::vector<double> obs = env.observe(state);
      std::vector<double> action(env.action_dim());
      if (step < config.warmup_steps) {
        for (auto& a : action) a = uniform(warmup_rng, env.spec().action_low, env.spec().action_high);
      } else {
        action = learner.policy.sample_action(obs, noise_rng).action;
      }
      const StepResult result = env.step(state, action);
      const std::vector<double> executed = clip_action(action, limit);
      buffer.push({obs, executed, result.reward, env.observe(result.state), result.terminal});
      episode_return += result.reward;
      state = result.state;

      if (result.done()) {
        LogRow row;
        row.env_step = step + 1;
        row.episode = episode;
        row.train_return = episode_return;
        losses.fill(row);
        log.rows.push_back(row);
        ++episode;
        episode_return = 0.0;
        state = env.reset(env_rng);
      }

      if (step + 1 > config.warmup_steps && buffer.size() >= static_cast<std::size_t>(config.batch_size)) {
        for (int u = 0; u < config.updates_per_step; ++u) {
          const auto batch = buffer.sample(config.batch_size, replay_rng);
          const StepLosses l = learner.update(*batch, noise_rng);
          log.step_losses.push_back(l);
          losses.add(l);
        }
      }

      if (config.eval_every > 0 && (step + 1) % config.eval_every == 0) {
        EvalRecord rec = evaluate(learner.policy, env, config.eval_episodes, step + 1);
        double mean = 0.0;
        for (double r : rec.returns) mean += r;
        mean /= static_cast<double>(rec.returns.size());
        double var = 0.0;
        for (double r : rec.returns) var += (r - mean) * (r - mean);
        var /= static_cast<double>(rec.returns.size());
        LogRow row;
        row.env_step = step + 1;
        row.episode = episode;
        row.eval_return_mean = mean;
        row.eval_return_std = std::sqrt(var);
        log.rows.push_back(row);
        log.evals.push_back(std::move(rec));
      }

      if (config.checkpoint_every > 0 && (step + 1) % config.checkpoint_every == 0 && hooks.on_checkpoint)
        hooks.on_checkpoint(step + 1);
    }
  } catch (const TrainingDiverged& e) {
    log.failure = e.what();
  } catch (const NumericError& e) {
    log.failure = std::string("numeric error: ") + e.what();
  }
  return log;
}

SacLearner<NFPolicy> make_learner(const PolicyArchitecture& arch, const TrainerConfig& config, std::uint64_t seed) {
  Rng init_rng = stream(seed, Stream::init);
  NFPolicy policy(arch);
  policy.init(init_rng);
  CriticPair critics(arch.state_dim, arch.action_dim, config.critic_hidden, config.critic_activation, config.twin_q);
  critics.init(init_rng);
  critics.action_limit = config.action_limit;
  return SacLearner<NFPolicy>(std::move(policy), std::move(critics), config);
}

template class SacLearner<NFPolicy>;
template class SacLearner<GaussianPolicy>;
template TrainingLog train(SacLearner<NFPolicy>&, const TrainerConfig&, const Environment&, std::uint64_t,
                           const TrainHooks&);
template TrainingLog train(SacLearner<GaussianPolicy>&, const TrainerConfig&, const Environment&, std::uint64_t,
                           const TrainHooks&);
template EvalRecord evaluate(const NFPolicy&, const Environment&, int, std::int64_t);
template EvalRecord evaluate(const GaussianPolicy&, const Environment&, int, std::int64_t);
template std::vector<Eigen::Vector2d> stochastic_terminal_positions(const NFPolicy&, const Environment&, int, Rng&);
template std::vector<Eigen::Vector2d> stochastic_terminal_positions(const GaussianPolicy&, const Environment&, int,
                                                                    Rng&);

}  // namespace sacnf
