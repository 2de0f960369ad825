#pragma once

// Normalizing-flow policy.
//
//   eps ~ N(0, I)
//   z   = eps * sigma + mu(s)           sigma = exp(L(s)) (conditional) or exp(L) (average)
//   a   = f_N o ... o f_1 (z)
//   log pi(a|s) = log N(eps; 0, I) - sum_k log sigma_k - sum_i log |det df_i|
//
// The density is only ever evaluated along the sampling path, where z and the
// per-layer Jacobians are known, so no flow inversion is needed.

#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "sacnf/dense_net.hpp"
#include "sacnf/flows.hpp"
#include "sacnf/random.hpp"
#include "sacnf/tape.hpp"

namespace sacnf {

enum class NoiseModel { conditional, average };

std::string to_string(NoiseModel m);
NoiseModel parse_noise_model(const std::string& name);

inline constexpr double kLogScaleMin = -5.0;
inline constexpr double kLogScaleMax = 2.0;
inline constexpr double kInitialLogScale = -1.0;

struct PolicyArchitecture {
  int state_dim = 2;
  int action_dim = 2;
  std::vector<int> hidden{8};
  Activation activation = Activation::tanh;
  Activation mean_output = Activation::tanh;  // output of the mean head; tanh keeps mu inside the action box
  NoiseModel noise = NoiseModel::average;
  std::vector<FlowFamily> flows;  // empty: plain Gaussian policy
};

// Parameter arrays of a policy, either its own (double) or bound to a tape (Var).
template <class T>
struct PolicyView {
  std::span<const T> mean;
  std::span<const T> scale;
  std::span<const T> flow;
};

template <class T>
struct ActionSample {
  std::vector<T> action;
  T log_prob;
  std::vector<double> noise;
  std::vector<T> pre_flow;
};

class NFPolicy {
 public:
  NFPolicy() = default;
  explicit NFPolicy(const PolicyArchitecture& arch);

  // Random network weights, log-scales at kInitialLogScale, near-identity flows.
  void init(Rng& rng);

  int state_dim() const { return mean_net.input_size(); }
  int action_dim() const { return mean_net.output_size(); }
  NoiseModel noise_model() const { return noise_; }

  DenseNet mean_net;
  DenseNet scale_net;             // conditional noise model only
  std::vector<double> log_scale;  // average noise model only
  FlowChain flows;

  std::vector<double>& scale_params() { return noise_ == NoiseModel::conditional ? scale_net.params : log_scale; }
  const std::vector<double>& scale_params() const {
    return noise_ == NoiseModel::conditional ? scale_net.params : log_scale;
  }

  PolicyView<double> view() const { return {mean_net.params, scale_params(), flows.params}; }

  // Policy forward with explicit base noise. Differentiable in the view's
  // parameters when T = Var. Throws NumericError naming the head on a
  // non-finite network output.
  template <class T>
  ActionSample<T> sample_with_noise(const PolicyView<T>& params, std::span<const double> state,
                                    std::span<const double> eps) const;

  // Everything after the networks: clamp the log-scales, form z, push it
  // through the flows and score it. `log_sigma` is the unclamped head output.
  template <class T>
  ActionSample<T> sample_from_base(std::span<const T> mu, std::span<const T> log_sigma, std::span<const T> flow_params,
                                   std::span<const double> eps) const;

  // Draws eps ~ N(0, I) from `rng` then evaluates the plain forward.
  ActionSample<double> sample_action(std::span<const double> state, Rng& rng) const;

  // Noise set to zero: chain(mu(s)).
  std::vector<double> deterministic_action(std::span<const double> state) const;

  std::size_t count_params() const {
    return mean_net.param_count() + scale_params().size() + flows.param_count();
  }

 private:
  NoiseModel noise_ = NoiseModel::average;
};

std::vector<double> draw_noise(Rng& rng, int dim);

// log N(eps; 0, I)
inline double standard_normal_log_density(std::span<const double> eps) {
  double sq = 0.0;
  for (double e : eps) sq += e * e;
  return -0.5 * sq - 0.5 * static_cast<double>(eps.size()) * std::log(2.0 * std::numbers::pi);
}

template <class T>
void check_finite_head(std::span<const T> values, const char* head) {
  for (const T& v : values)
    if (!std::isfinite(value_of(v))) throw NumericError(std::string("non-finite output from ") + head);
}

template <class T>
ActionSample<T> NFPolicy::sample_with_noise(const PolicyView<T>& params, std::span<const double> state,
                                            std::span<const double> eps) const {
  if (eps.size() != static_cast<std::size_t>(action_dim())) throw ConfigError("sample_with_noise: noise dimension mismatch");
  std::vector<T> mu = net_apply<T, double>(mean_net, params.mean, state);
  check_finite_head<T>(mu, "policy.mu");
  if (noise_ == NoiseModel::conditional) {
    std::vector<T> log_sigma = net_apply<T, double>(scale_net, params.scale, state);
    check_finite_head<T>(log_sigma, "policy.scale");
    return sample_from_base<T>(mu, log_sigma, params.flow, eps);
  }
  return sample_from_base<T>(mu, params.scale, params.flow, eps);
}

template <class T>
ActionSample<T> NFPolicy::sample_from_base(std::span<const T> mu, std::span<const T> log_sigma_raw,
                                           std::span<const T> flow_params, std::span<const double> eps) const {
  const std::size_t d = mu.size();
  std::vector<T> log_sigma;
  log_sigma.reserve(d);
  for (const T& ls : log_sigma_raw) log_sigma.push_back(clamp(ls, kLogScaleMin, kLogScaleMax));

  ActionSample<T> out;
  out.noise.assign(eps.begin(), eps.end());
  out.pre_flow.reserve(d);
  for (std::size_t k = 0; k < d; ++k) out.pre_flow.push_back(eps[k] * exp(log_sigma[k]) + mu[k]);

  FlowOutput<T> flowed = flows.apply<T>(flow_params, out.pre_flow);
  out.action = std::move(flowed.z);
  const T base = standard_normal_log_density(eps) - sum<T>(log_sigma);
  out.log_prob = base - flowed.log_det;
  return out;
}

}  // namespace sacnf
