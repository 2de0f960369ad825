#include "sacnf/sac.hpp"

namespace sacnf {

namespace {

std::vector<int> widths(int in, const std::vector<int>& hidden) {
  std::vector<int> s{in};
  s.insert(s.end(), hidden.begin(), hidden.end());
  s.push_back(1);
  return s;
}

}  // namespace

CriticPair::CriticPair(int state_dim, int action_dim, const std::vector<int>& hidden, Activation act, bool twin_q)
    : q(widths(state_dim + action_dim, hidden), act),
      v(widths(state_dim, hidden), act),
      v_target(v) {
  if (twin_q) q2 = q;
}

void CriticPair::init(Rng& rng) {
  q.init(rng);
  v.init(rng);
  v_target.params = v.params;
  if (q2) q2->init(rng);
}

void polyak_update(DenseNet& target, const DenseNet& online, double tau) {
  if (target.params.size() != online.params.size())
    throw ConfigError("polyak_update: target and online networks differ in shape");
  for (std::size_t i = 0; i < target.params.size(); ++i)
    target.params[i] = (1.0 - tau) * target.params[i] + tau * online.params[i];
}

std::vector<std::vector<double>> draw_batch_noise(Rng& rng, std::size_t m, int action_dim) {
  std::vector<std::vector<double>> noise;
  noise.reserve(m);
  for (std::size_t i = 0; i < m; ++i) noise.push_back(draw_noise(rng, action_dim));
  return noise;
}

}  // namespace sacnf
