#pragma once

// Radial and planar normalizing-flow layers.
//
// Each layer is stored as unconstrained ("raw") parameters; the invertibility
// constraints are imposed by a smooth reparameterization every time the layer
// is evaluated, so any raw vector is a valid, invertible layer:
//
//   radial  f(z) = z + beta / (alpha + |z - z0|) * (z - z0)
//           alpha = softplus(raw_alpha),  beta = -alpha + softplus(raw_beta)  =>  beta >= -alpha
//   planar  f(z) = z + u_hat * tanh(w.z + b)
//           u_hat = u + (m(w.u) - w.u) * w / |w|^2,  m(x) = -1 + softplus(x)  =>  w.u_hat >= -1
//
// All functions are templated on the scalar so the same code serves plain
// evaluation (double) and taped evaluation (Var).

#include <span>
#include <string>
#include <vector>

#include "sacnf/random.hpp"
#include "sacnf/tape.hpp"

namespace sacnf {

enum class FlowFamily { radial, planar };

std::string to_string(FlowFamily f);
FlowFamily parse_flow_family(const std::string& name);

// Raw parameter count of one layer in dimension d.
//   radial: [z0 (d), raw_alpha, raw_beta]
//   planar: [u (d), w (d), b]
std::size_t flow_param_count(FlowFamily family, int dim);

template <class T>
struct FlowOutput {
  std::vector<T> z;
  T log_det;
};

template <class T>
struct RadialConstrained {
  std::span<const T> center;
  T alpha;
  T beta;
};

template <class T>
RadialConstrained<T> constrain_radial(std::span<const T> raw) {
  const std::size_t d = raw.size() - 2;
  T alpha = softplus(raw[d]);
  T beta = -alpha + softplus(raw[d + 1]);
  return {raw.first(d), alpha, beta};
}

// Radial layer on z; `raw` holds d + 2 parameters.
template <class T>
FlowOutput<T> radial_apply(std::span<const T> raw, std::span<const T> z) {
  const std::size_t d = z.size();
  if (raw.size() != d + 2) throw ConfigError("radial_apply: parameter/dimension mismatch");
  const auto [center, alpha, beta] = constrain_radial(raw);

  std::vector<T> diff;
  diff.reserve(d);
  for (std::size_t i = 0; i < d; ++i) diff.push_back(z[i] - center[i]);
  const T r = norm(std::span<const T>(diff));
  const T h = 1.0 / (alpha + r);
  const T beta_h = beta * h;

  FlowOutput<T> out{{}, T{}};
  out.z.reserve(d);
  for (std::size_t i = 0; i < d; ++i) out.z.push_back(z[i] + beta_h * diff[i]);

  // det J = (1 + beta h)^(d-1) * (1 + beta h + beta h' r),  h' = -h^2
  const T radial_term = log(1.0 + beta_h - beta_h * h * r);
  if (d > 1) out.log_det = static_cast<double>(d - 1) * log(1.0 + beta_h) + radial_term;
  else out.log_det = radial_term;
  return out;
}

template <class T>
std::vector<T> constrain_planar_u(std::span<const T> u, std::span<const T> w) {
  const double w_sq = value_of(dot(w, w));
  if (w_sq == 0.0) return std::vector<T>(u.begin(), u.end());
  const T wu = dot(u, w);
  const T shift = (-1.0 + softplus(wu) - wu) / dot(w, w);
  std::vector<T> u_hat;
  u_hat.reserve(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) u_hat.push_back(u[i] + shift * w[i]);
  return u_hat;
}

// Planar layer on z; `raw` holds 2d + 1 parameters.
template <class T>
FlowOutput<T> planar_apply(std::span<const T> raw, std::span<const T> z) {
  const std::size_t d = z.size();
  if (raw.size() != 2 * d + 1) throw ConfigError("planar_apply: parameter/dimension mismatch");
  const auto u = raw.first(d);
  const auto w = raw.subspan(d, d);
  const T& b = raw[2 * d];
  const std::vector<T> u_hat = constrain_planar_u(u, w);

  const T t = tanh(dot(w, z) + b);
  FlowOutput<T> out{{}, T{}};
  out.z.reserve(d);
  for (std::size_t i = 0; i < d; ++i) out.z.push_back(z[i] + u_hat[i] * t);
  // 1 + psi w.u_hat with w.u_hat = -1 + softplus(w.u) rewritten as
  // t^2 + psi softplus(w.u), which stays positive when softplus underflows.
  const T psi = 1.0 - t * t;
  if (value_of(dot(w, w)) == 0.0) out.log_det = log(abs(1.0 + psi * dot(w, std::span<const T>(u_hat))));
  else out.log_det = log(abs(t * t + psi * softplus(dot(u, w))));
  return out;
}

// Ordered composition f_N o ... o f_1 over a fixed dimension. The chain only
// describes the layout; parameters live in `params` (concatenated raw layer
// parameters) or are supplied as a taped view of the same layout.
class FlowChain {
 public:
  FlowChain() = default;
  FlowChain(int dim, std::vector<FlowFamily> layers);

  int dim() const { return dim_; }
  std::size_t size() const { return layers_.size(); }
  bool empty() const { return layers_.empty(); }
  FlowFamily family(std::size_t i) const { return layers_[i]; }
  std::size_t offset(std::size_t i) const { return offsets_[i]; }
  std::size_t layer_param_count(std::size_t i) const { return offsets_[i + 1] - offsets_[i]; }
  std::size_t param_count() const { return offsets_.back(); }

  std::vector<double> params;

  // Near-identity start: radial layers get z0 = 0, raw_alpha = raw_beta = 0
  // (beta exactly 0); planar layers get a random unit w, b = 0 and u chosen so
  // that u_hat is a small multiple (1e-2) of a random direction.
  void init(Rng& rng);

  // Applies every layer in order. log_det is the summed log |det J_i| along the path.
  template <class T>
  FlowOutput<T> apply(std::span<const T> chain_params, std::span<const T> z) const {
    if (static_cast<int>(z.size()) != dim_) throw ConfigError("FlowChain: input dimension mismatch");
    if (chain_params.size() != param_count()) throw ConfigError("FlowChain: parameter count mismatch");
    Tape* tape = nullptr;
    if constexpr (is_var_v<T>) tape = z.front().tape;
    FlowOutput<T> out{std::vector<T>(z.begin(), z.end()), lift<T>(0.0, tape)};
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      auto raw = chain_params.subspan(offsets_[i], layer_param_count(i));
      FlowOutput<T> step = layers_[i] == FlowFamily::radial ? radial_apply<T>(raw, out.z) : planar_apply<T>(raw, out.z);
      out.z = std::move(step.z);
      out.log_det = (i == 0) ? step.log_det : out.log_det + step.log_det;
    }
    return out;
  }

  FlowOutput<double> apply(std::span<const double> z) const { return apply<double>(params, z); }

  // Copy whose layer displacements are multiplied by `scale`: radial beta ->
  // scale * beta, planar u_hat -> scale * u_hat. scale = 0 is exactly the identity map.
  FlowChain scaled_displacement(double scale) const;

 private:
  int dim_ = 0;
  std::vector<FlowFamily> layers_;
  std::vector<std::size_t> offsets_{0};
};

// Raw planar u that produces the constrained direction `u_hat` for weights `w`.
// Requires w.u_hat > -1 (or w == 0).
std::vector<double> planar_raw_u(std::span<const double> u_hat, std::span<const double> w);

// Inverse of softplus on (0, inf).
double softplus_inverse(double y);

}  // namespace sacnf
