#include "sacnf/dense_net.hpp"

namespace sacnf {

std::string to_string(Activation a) {
  switch (a) {
    case Activation::tanh: return "tanh";
    case Activation::relu: return "relu";
    default: return "identity";
  }
}

Activation parse_activation(const std::string& name) {
  if (name == "tanh") return Activation::tanh;
  if (name == "relu") return Activation::relu;
  if (name == "identity") return Activation::identity;
  throw ConfigError("unknown activation '" + name + "'");
}

std::size_t dense_param_count(std::span<const int> sizes) {
  std::size_t n = 0;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l)
    n += static_cast<std::size_t>(sizes[l]) * sizes[l + 1] + sizes[l + 1];
  return n;
}

DenseNet::DenseNet(std::vector<int> layer_sizes, Activation hidden_act, Activation output_act)
    : sizes(std::move(layer_sizes)) {
  if (sizes.size() < 2) throw ConfigError("DenseNet needs at least an input and an output width");
  for (int s : sizes)
    if (s < 1) throw ConfigError("DenseNet layer widths must be positive");
  activations.assign(sizes.size() - 1, hidden_act);
  activations.back() = output_act;
  params.assign(dense_param_count(sizes), 0.0);
}

std::size_t DenseNet::layer_offset(std::size_t l) const {
  return dense_param_count(std::span<const int>(sizes).first(l + 1));
}

void DenseNet::init(Rng& rng, double output_scale) {
  for (std::size_t l = 0; l < layer_count(); ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(sizes[l]));
    const double scale = (l + 1 == layer_count()) ? output_scale : 1.0;
    const std::size_t begin = layer_offset(l);
    const std::size_t end = begin + static_cast<std::size_t>(sizes[l]) * sizes[l + 1] + sizes[l + 1];
    for (std::size_t i = begin; i < end; ++i) params[i] = scale * uniform(rng, -bound, bound);
  }
}

}  // namespace sacnf
