#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace sacnf {

struct AdamConfig {
  double learning_rate = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Moment accumulators for one parameter array.
struct AdamState {
  AdamConfig config;
  std::int64_t step = 0;
  std::vector<double> first_moment;
  std::vector<double> second_moment;

  AdamState() = default;
  AdamState(AdamConfig cfg, std::size_t n) : config(cfg), first_moment(n, 0.0), second_moment(n, 0.0) {}
};

// Bias-corrected Adam update in place. Throws NumericError on a non-finite
// gradient before touching anything, ConfigError on misaligned arrays.
void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads);

}  // namespace sacnf
