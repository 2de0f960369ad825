#pragma once

// Soft actor-critic losses over a minibatch. Each loss is templated on the
// scalar type of the parameters being differentiated: double evaluates the
// loss, Var records it on a tape. Everything else (targets, the critic inside
// the policy loss) is plain double, so no gradient can leak into it.
//
//   L_Q  = mean 1/2 (Q(s,a) - (r + gamma (1 - done) V_target(s')))^2
//   L_V  = mean 1/2 (V(s) - [Q(s,a~) - alpha log pi(a~|s)])^2      a~ ~ pi(.|s)
//   L_pi = mean alpha log pi(a~|s) - Q(s,a~)                        a~ reparameterized
//
// Q is evaluated at the executed (clipped) action; log pi at the raw one.

#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "sacnf/dense_net.hpp"
#include "sacnf/policy.hpp"
#include "sacnf/replay_buffer.hpp"

namespace sacnf {

struct CriticPair {
  DenseNet q;
  DenseNet v;
  DenseNet v_target;           // Polyak average of v
  std::optional<DenseNet> q2;  // second critic when twin_q is enabled
  // Critics see actions as the environment executes them: clipped to
  // [-action_limit, action_limit], with zero gradient outside.
  double action_limit = std::numeric_limits<double>::infinity();

  CriticPair() = default;
  CriticPair(int state_dim, int action_dim, const std::vector<int>& hidden, Activation act, bool twin_q);
  void init(Rng& rng);
};

// target <- (1 - tau) target + tau online
void polyak_update(DenseNet& target, const DenseNet& online, double tau);

inline std::vector<double> concat(std::span<const double> a, std::span<const double> b) {
  std::vector<double> out(a.begin(), a.end());
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

inline double critic_value(const DenseNet& q, std::span<const double> s, std::span<const double> a) {
  return net_apply(q, concat(s, a))[0];
}

inline std::vector<double> clip_action(std::span<const double> a, double limit) {
  std::vector<double> out;
  out.reserve(a.size());
  for (double x : a) out.push_back(clamp(x, -limit, limit));
  return out;
}

// Noise for one draw per batch element.
std::vector<std::vector<double>> draw_batch_noise(Rng& rng, std::size_t m, int action_dim);

template <class P>
P q_loss(std::span<const Transition> batch, const DenseNet& q, std::span<const P> q_params, const DenseNet& v_target,
         double gamma) {
  std::vector<P> terms;
  terms.reserve(batch.size());
  for (const Transition& t : batch) {
    const double bootstrap = t.done ? 0.0 : net_apply(v_target, t.next_state)[0];
    const double target = t.reward + gamma * bootstrap;
    const std::vector<double> input = concat(t.state, t.action);
    const P pred = net_apply<P, double>(q, q_params, input)[0];
    terms.push_back(0.5 * square(pred - target));
  }
  return mean<P>(terms);
}

template <class P, class Policy>
P v_loss(std::span<const Transition> batch, const DenseNet& v, std::span<const P> v_params, const CriticPair& critics,
         const Policy& policy, double alpha_ent, std::span<const std::vector<double>> noise) {
  std::vector<P> terms;
  terms.reserve(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const Transition& t = batch[i];
    const auto draw = policy.template sample_with_noise<double>(policy.view(), t.state, noise[i]);
    const auto executed = clip_action(draw.action, critics.action_limit);
    double q_val = critic_value(critics.q, t.state, executed);
    if (critics.q2) q_val = std::min(q_val, critic_value(*critics.q2, t.state, executed));
    const double target = q_val - alpha_ent * draw.log_prob;
    const P pred = net_apply<P, double>(v, v_params, t.state)[0];
    terms.push_back(0.5 * square(pred - target));
  }
  return mean<P>(terms);
}

template <class P>
struct PolicyLoss {
  P loss;
  double entropy = 0.0;  // Monte-Carlo estimate -mean log pi over the batch
};

template <class P, class Policy>
PolicyLoss<P> pi_loss(std::span<const Transition> batch, const CriticPair& critics, const Policy& policy,
                      const PolicyView<P>& params, double alpha_ent, std::span<const std::vector<double>> noise) {
  std::vector<P> terms;
  terms.reserve(batch.size());
  double log_prob_sum = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const Transition& t = batch[i];
    auto draw = policy.template sample_with_noise<P>(params, t.state, noise[i]);
    log_prob_sum += value_of(draw.log_prob);

    Tape* tape = nullptr;
    if constexpr (is_var_v<P>) tape = draw.log_prob.tape;
    std::vector<P> input;
    input.reserve(t.state.size() + draw.action.size());
    for (double s : t.state) input.push_back(lift<P>(s, tape));
    for (const P& a : draw.action) input.push_back(clamp(a, -critics.action_limit, critics.action_limit));

    P q_val = net_apply<double, P>(critics.q, critics.q.params, input)[0];
    if (critics.q2) {
      P q2_val = net_apply<double, P>(*critics.q2, critics.q2->params, input)[0];
      if (value_of(q2_val) < value_of(q_val)) q_val = q2_val;
    }
    terms.push_back(alpha_ent * draw.log_prob - q_val);
  }
  return {mean<P>(terms), -log_prob_sum / static_cast<double>(batch.size())};
}

}  // namespace sacnf
