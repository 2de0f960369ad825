#pragma once

// Plain diagonal-Gaussian SAC policy: a = mu(s) + sigma * eps. Kept as a
// stand-alone reference so the flow policy with zero layers can be checked
// against an engine that never touches flow code.

#include "sacnf/policy.hpp"

namespace sacnf {

class GaussianPolicy {
 public:
  GaussianPolicy() = default;
  explicit GaussianPolicy(const PolicyArchitecture& arch);

  // Takes mean and scale parameters from a flow policy. Its flows are ignored.
  static GaussianPolicy from_base_of(const NFPolicy& policy);

  void init(Rng& rng);

  int state_dim() const { return mean_net.input_size(); }
  int action_dim() const { return mean_net.output_size(); }

  DenseNet mean_net;
  DenseNet scale_net;
  std::vector<double> log_scale;

  std::vector<double>& scale_params() { return noise_ == NoiseModel::conditional ? scale_net.params : log_scale; }
  const std::vector<double>& scale_params() const {
    return noise_ == NoiseModel::conditional ? scale_net.params : log_scale;
  }
  PolicyView<double> view() const { return {mean_net.params, scale_params(), {}}; }

  // log pi(a|s) = sum_k log N(a_k; mu_k, sigma_k), written through the
  // standardized residual (a - mu) / sigma = eps of the reparameterized draw.
  template <class T>
  ActionSample<T> sample_with_noise(const PolicyView<T>& params, std::span<const double> state,
                                    std::span<const double> eps) const {
    std::vector<T> mu = net_apply<T, double>(mean_net, params.mean, state);
    check_finite_head<T>(mu, "policy.mu");
    if (noise_ == NoiseModel::conditional) {
      std::vector<T> log_sigma = net_apply<T, double>(scale_net, params.scale, state);
      check_finite_head<T>(log_sigma, "policy.scale");
      return sample_from_base<T>(mu, log_sigma, {}, eps);
    }
    return sample_from_base<T>(mu, params.scale, {}, eps);
  }

  // Flow parameters are accepted for interface parity and must be empty.
  template <class T>
  ActionSample<T> sample_from_base(std::span<const T> mu, std::span<const T> log_sigma_raw,
                                   std::span<const T> flow_params, std::span<const double> eps) const {
    if (!flow_params.empty()) throw ConfigError("GaussianPolicy has no flow parameters");
    std::vector<T> log_sigma;
    log_sigma.reserve(mu.size());
    for (const T& ls : log_sigma_raw) log_sigma.push_back(clamp(ls, kLogScaleMin, kLogScaleMax));

    ActionSample<T> out;
    out.noise.assign(eps.begin(), eps.end());
    for (std::size_t k = 0; k < mu.size(); ++k) out.action.push_back(eps[k] * exp(log_sigma[k]) + mu[k]);
    out.pre_flow = out.action;
    out.log_prob = standard_normal_log_density(eps) - sum<T>(log_sigma);
    return out;
  }

  NoiseModel noise_model() const { return noise_; }

  ActionSample<double> sample_action(std::span<const double> state, Rng& rng) const {
    const auto eps = draw_noise(rng, action_dim());
    return sample_with_noise<double>(view(), state, eps);
  }

  std::vector<double> deterministic_action(std::span<const double> state) const { return net_apply(mean_net, state); }

  std::size_t count_params() const { return mean_net.param_count() + scale_params().size(); }

 private:
  NoiseModel noise_ = NoiseModel::average;
};

}  // namespace sacnf
