#include "sacnf/policy.hpp"

namespace sacnf {

std::string to_string(NoiseModel m) { return m == NoiseModel::conditional ? "conditional" : "average"; }

NoiseModel parse_noise_model(const std::string& name) {
  if (name == "conditional") return NoiseModel::conditional;
  if (name == "average") return NoiseModel::average;
  throw ConfigError("unknown noise model '" + name + "'");
}

namespace {

std::vector<int> layer_sizes(int in, const std::vector<int>& hidden, int out) {
  std::vector<int> sizes{in};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(out);
  return sizes;
}

}  // namespace

NFPolicy::NFPolicy(const PolicyArchitecture& arch)
    : mean_net(layer_sizes(arch.state_dim, arch.hidden, arch.action_dim), arch.activation, arch.mean_output),
      flows(arch.action_dim, arch.flows),
      noise_(arch.noise) {
  if (noise_ == NoiseModel::conditional)
    scale_net = DenseNet(layer_sizes(arch.state_dim, arch.hidden, arch.action_dim), arch.activation);
  else
    log_scale.assign(arch.action_dim, kInitialLogScale);
}

void NFPolicy::init(Rng& rng) {
  mean_net.init(rng);
  if (noise_ == NoiseModel::conditional) {
    scale_net.init(rng, 0.1);
    // Output bias starts at the initial log-scale.
    const std::size_t bias = scale_net.params.size() - static_cast<std::size_t>(scale_net.output_size());
    for (std::size_t i = bias; i < scale_net.params.size(); ++i) scale_net.params[i] = kInitialLogScale;
  } else {
    std::fill(log_scale.begin(), log_scale.end(), kInitialLogScale);
  }
  flows.init(rng);
}

std::vector<double> draw_noise(Rng& rng, int dim) {
  std::vector<double> eps(static_cast<std::size_t>(dim));
  for (auto& e : eps) e = standard_normal(rng);
  return eps;
}

ActionSample<double> NFPolicy::sample_action(std::span<const double> state, Rng& rng) const {
  const auto eps = draw_noise(rng, action_dim());
  return sample_with_noise<double>(view(), state, eps);
}

std::vector<double> NFPolicy::deterministic_action(std::span<const double> state) const {
  std::vector<double> mu = net_apply(mean_net, state);
  check_finite_head<double>(mu, "policy.mu");
  return flows.apply(mu).z;
}

}  // namespace sacnf
