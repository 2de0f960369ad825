#include "sacnf/batch_net.hpp"

#include <string>

namespace sacnf {

namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void activate_inplace(Activation a, Eigen::MatrixXd& x) {
  switch (a) {
    case Activation::tanh: x = x.array().tanh().matrix(); break;
    case Activation::relu: x = x.cwiseMax(0.0); break;
    default: break;
  }
}

// Multiplies `grad` by the activation derivative, given the activation output.
void activation_backward(Activation a, const Eigen::MatrixXd& out, Eigen::MatrixXd& grad) {
  switch (a) {
    case Activation::tanh: grad.array() *= 1.0 - out.array().square(); break;
    case Activation::relu: grad.array() *= (out.array() > 0.0).cast<double>(); break;
    default: break;
  }
}

}  // namespace

Eigen::MatrixXd batch_forward(const DenseNet& net, std::span<const double> params, const Eigen::MatrixXd& input,
                              BatchCache* cache) {
  if (input.rows() != net.input_size())
    throw ConfigError("batch_forward: input width " + std::to_string(input.rows()) + " != " +
                      std::to_string(net.input_size()));
  if (params.size() != net.param_count()) throw ConfigError("batch_forward: parameter count mismatch");
  if (cache) {
    cache->activations.resize(net.layer_count() + 1);
    cache->activations[0] = input;
  }
  Eigen::MatrixXd current = input;
  std::size_t offset = 0;
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    const int in = net.sizes[l];
    const int out = net.sizes[l + 1];
    Eigen::Map<const RowMajor> w(params.data() + offset, out, in);
    Eigen::Map<const Eigen::VectorXd> b(params.data() + offset + static_cast<std::size_t>(in) * out, out);
    Eigen::MatrixXd next = w * current;
    next.colwise() += b;
    activate_inplace(net.activations[l], next);
    offset += static_cast<std::size_t>(in) * out + out;
    current = std::move(next);
    if (cache) cache->activations[l + 1] = current;
  }
  return current;
}

Eigen::MatrixXd batch_backward(const DenseNet& net, std::span<const double> params, const BatchCache& cache,
                               const Eigen::MatrixXd& grad_output, std::span<double> grad_params) {
  if (cache.activations.size() != net.layer_count() + 1) throw ConfigError("batch_backward: cache does not match net");
  const bool want_params = !grad_params.empty();
  if (want_params && grad_params.size() != net.param_count())
    throw ConfigError("batch_backward: gradient buffer size mismatch");

  Eigen::MatrixXd grad = grad_output;
  for (std::size_t l = net.layer_count(); l-- > 0;) {
    const int in = net.sizes[l];
    const int out = net.sizes[l + 1];
    const std::size_t offset = net.layer_offset(l);
    activation_backward(net.activations[l], cache.activations[l + 1], grad);
    if (want_params) {
      Eigen::Map<RowMajor> gw(grad_params.data() + offset, out, in);
      Eigen::Map<Eigen::VectorXd> gb(grad_params.data() + offset + static_cast<std::size_t>(in) * out, out);
      gw.noalias() += grad * cache.activations[l].transpose();
      gb.noalias() += grad.rowwise().sum();
    }
    Eigen::Map<const RowMajor> w(params.data() + offset, out, in);
    grad = w.transpose() * grad;
  }
  return grad;
}

}  // namespace sacnf
