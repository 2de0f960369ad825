#include "sacnf/flows.hpp"

#include <cmath>

namespace sacnf {

std::string to_string(FlowFamily f) { return f == FlowFamily::radial ? "radial" : "planar"; }

FlowFamily parse_flow_family(const std::string& name) {
  if (name == "radial") return FlowFamily::radial;
  if (name == "planar") return FlowFamily::planar;
  throw ConfigError("unknown flow family '" + name + "'");
}

std::size_t flow_param_count(FlowFamily family, int dim) {
  const auto d = static_cast<std::size_t>(dim);
  return family == FlowFamily::radial ? d + 2 : 2 * d + 1;
}

double softplus_inverse(double y) {
  if (!(y > 0.0)) throw ConfigError("softplus_inverse: argument must be positive");
  // log(e^y - 1) = y + log(1 - e^-y)
  return y + std::log(-std::expm1(-y));
}

FlowChain::FlowChain(int dim, std::vector<FlowFamily> layers) : dim_(dim), layers_(std::move(layers)) {
  if (dim < 1) throw ConfigError("FlowChain: dimension must be positive");
  for (FlowFamily f : layers_) offsets_.push_back(offsets_.back() + flow_param_count(f, dim));
  params.assign(offsets_.back(), 0.0);
}

void FlowChain::init(Rng& rng) {
  const auto d = static_cast<std::size_t>(dim_);
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    std::span<double> raw(params.data() + offsets_[i], layer_param_count(i));
    std::fill(raw.begin(), raw.end(), 0.0);
    if (layers_[i] == FlowFamily::planar) {
      std::vector<double> w(d), u_hat(d);
      double w_norm = 0.0;
      for (auto& x : w) {
        x = standard_normal(rng);
        w_norm += x * x;
      }
      w_norm = std::sqrt(w_norm);
      for (auto& x : w) x /= w_norm;
      for (auto& x : u_hat) x = 1e-2 * standard_normal(rng);
      const auto u = planar_raw_u(u_hat, w);
      std::copy(u.begin(), u.end(), raw.begin());
      std::copy(w.begin(), w.end(), raw.begin() + d);
    }
  }
}

std::vector<double> planar_raw_u(std::span<const double> u_hat, std::span<const double> w) {
  const double w_sq = dot(w, w);
  std::vector<double> u(u_hat.begin(), u_hat.end());
  if (w_sq == 0.0) return u;
  const double w_uhat = dot(w, u_hat);
  // w.u_hat = m(w.u)  =>  w.u = softplus^-1(w.u_hat + 1)
  const double wu = softplus_inverse(w_uhat + 1.0);
  for (std::size_t i = 0; i < u.size(); ++i) u[i] = u_hat[i] - (w_uhat - wu) * w[i] / w_sq;
  return u;
}

FlowChain FlowChain::scaled_displacement(double scale) const {
  FlowChain out = *this;
  const auto d = static_cast<std::size_t>(dim_);
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    std::span<const double> raw(params.data() + offsets_[i], layer_param_count(i));
    std::span<double> dst(out.params.data() + offsets_[i], layer_param_count(i));
    if (scale == 0.0) {
      // Exact identity: beta = -alpha + softplus(raw_alpha) = 0, planar u = w = 0.
      if (layers_[i] == FlowFamily::radial) dst[d + 1] = dst[d];
      else std::fill(dst.begin(), dst.begin() + static_cast<std::ptrdiff_t>(2 * d), 0.0);
    } else if (layers_[i] == FlowFamily::radial) {
      const auto c = constrain_radial(raw);
      dst[d + 1] = softplus_inverse(c.alpha + scale * c.beta);
    } else {
      const auto u = raw.first(d);
      const auto w = raw.subspan(d, d);
      auto u_hat = constrain_planar_u(u, w);
      for (auto& x : u_hat) x *= scale;
      const auto new_u = planar_raw_u(u_hat, w);
      std::copy(new_u.begin(), new_u.end(), dst.begin());
    }
  }
  return out;
}

}  // namespace sacnf
