#pragma once

// Column-batched forward and backward passes of a DenseNet with Eigen. Each
// column of the input is one sample. Used by the learner for the network
// bodies; the per-sample policy head stays on the scalar tape.

#include <Eigen/Core>
#include <span>
#include <vector>

#include "sacnf/dense_net.hpp"

namespace sacnf {

struct BatchCache {
  std::vector<Eigen::MatrixXd> activations;  // [0] is the input, [l + 1] the output of layer l
};

// Output is output_size x batch. Fills `cache` when given.
Eigen::MatrixXd batch_forward(const DenseNet& net, std::span<const double> params, const Eigen::MatrixXd& input,
                              BatchCache* cache = nullptr);

inline Eigen::MatrixXd batch_forward(const DenseNet& net, const Eigen::MatrixXd& input, BatchCache* cache = nullptr) {
  return batch_forward(net, net.params, input, cache);
}

// Backpropagates `grad_output` (output_size x batch) through a cached forward
// pass. Adds parameter gradients into `grad_params` when it is non-empty and
// returns the gradient with respect to the input.
Eigen::MatrixXd batch_backward(const DenseNet& net, std::span<const double> params, const BatchCache& cache,
                               const Eigen::MatrixXd& grad_output, std::span<double> grad_params);

}  // namespace sacnf
