#include "sacnf/gaussian_policy.hpp"

namespace sacnf {

GaussianPolicy::GaussianPolicy(const PolicyArchitecture& arch) : noise_(arch.noise) {
  PolicyArchitecture base = arch;
  base.flows.clear();
  NFPolicy shape(base);
  mean_net = shape.mean_net;
  scale_net = shape.scale_net;
  log_scale = shape.log_scale;
}

GaussianPolicy GaussianPolicy::from_base_of(const NFPolicy& policy) {
  GaussianPolicy g;
  g.noise_ = policy.noise_model();
  g.mean_net = policy.mean_net;
  g.scale_net = policy.scale_net;
  g.log_scale = policy.log_scale;
  return g;
}

void GaussianPolicy::init(Rng& rng) {
  // Same initialization scheme as the flow policy's base.
  mean_net.init(rng);
  if (noise_ == NoiseModel::conditional) {
    scale_net.init(rng, 0.1);
    const std::size_t bias = scale_net.params.size() - static_cast<std::size_t>(scale_net.output_size());
    for (std::size_t i = bias; i < scale_net.params.size(); ++i) scale_net.params[i] = kInitialLogScale;
  } else {
    std::fill(log_scale.begin(), log_scale.end(), kInitialLogScale);
  }
}

}  // namespace sacnf
