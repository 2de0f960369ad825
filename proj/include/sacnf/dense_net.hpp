#pragma once

#include <span>
#include <string>
#include <vector>

#include "sacnf/random.hpp"
#include "sacnf/tape.hpp"

namespace sacnf {

enum class Activation { identity, tanh, relu };

std::string to_string(Activation a);
Activation parse_activation(const std::string& name);

// Fully connected feed-forward network. Parameters are one flat array laid
// out layer by layer as [W (out x in, row-major), b (out)].
struct DenseNet {
  std::vector<int> sizes;              // input width, hidden widths..., output width
  std::vector<Activation> activations;  // one per layer, sizes.size() - 1 entries
  std::vector<double> params;

  DenseNet() = default;
  // Hidden layers use `hidden_act`, the output layer `output_act`. Parameters are zero.
  DenseNet(std::vector<int> layer_sizes, Activation hidden_act, Activation output_act = Activation::identity);

  int input_size() const { return sizes.front(); }
  int output_size() const { return sizes.back(); }
  std::size_t layer_count() const { return activations.size(); }
  std::size_t param_count() const { return params.size(); }

  // Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases; the
  // last layer is additionally scaled by `output_scale`.
  void init(Rng& rng, double output_scale = 1.0);

  // Offset of layer l's weights in `params`.
  std::size_t layer_offset(std::size_t l) const;
};

std::size_t dense_param_count(std::span<const int> sizes);

inline double activate(Activation a, double x) {
  switch (a) {
    case Activation::tanh: return std::tanh(x);
    case Activation::relu: return relu(x);
    default: return x;
  }
}
inline Var activate(Activation a, Var x) {
  switch (a) {
    case Activation::tanh: return tanh(x);
    case Activation::relu: return relu(x);
    default: return x;
  }
}

// Forward pass with parameters of scalar type P (double or taped leaves) and
// input of scalar type X. Throws ConfigError on width mismatch.
template <class P, class X>
std::vector<promote_t<P, X>> net_apply(const DenseNet& net, std::span<const P> params, std::span<const X> input) {
  using Out = promote_t<P, X>;
  if (static_cast<int>(input.size()) != net.input_size())
    throw ConfigError("net_apply: input width " + std::to_string(input.size()) + " != " +
                      std::to_string(net.input_size()));
  if (params.size() != net.param_count())
    throw ConfigError("net_apply: parameter count mismatch");

  std::vector<Out> current;
  std::vector<Out> next;
  std::size_t offset = 0;
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    const int in = net.sizes[l];
    const int out = net.sizes[l + 1];
    const std::size_t bias_offset = offset + static_cast<std::size_t>(in) * out;
    next.clear();
    next.reserve(out);
    for (int i = 0; i < out; ++i) {
      auto w = params.subspan(offset + static_cast<std::size_t>(i) * in, in);
      Out pre = (l == 0) ? Out(affine(params[bias_offset + i], w, input))
                         : Out(affine<P, Out>(params[bias_offset + i], w, std::span<const Out>(current)));
      next.push_back(activate(net.activations[l], pre));
    }
    offset = bias_offset + out;
    current.swap(next);
  }
  return current;
}

inline std::vector<double> net_apply(const DenseNet& net, std::span<const double> input) {
  return net_apply<double, double>(net, net.params, input);
}

}  // namespace sacnf
