#include "sacnf/replay_buffer.hpp"

#include <algorithm>
#include <cmath>

#include "sacnf/errors.hpp"

namespace sacnf {

ReplayBuffer::ReplayBuffer(std::size_t capacity, int state_dim, int action_dim)
    : capacity_(capacity), state_dim_(state_dim), action_dim_(action_dim) {
  if (capacity == 0) throw ConfigError("replay buffer capacity must be positive");
}

void ReplayBuffer::push(const Transition& t) {
  if (t.state.size() != state_dim_ || t.next_state.size() != state_dim_ || t.action.size() != action_dim_)
    throw ConfigError("replay buffer: transition dimensions do not match the buffer");
  if (!std::isfinite(t.reward)) throw ConfigError("replay buffer: non-finite reward");

  // Storage grows lazily up to capacity.
  if (rewards_.size() < capacity_ && head_ == rewards_.size()) {
    states_.insert(states_.end(), t.state.begin(), t.state.end());
    actions_.insert(actions_.end(), t.action.begin(), t.action.end());
    next_states_.insert(next_states_.end(), t.next_state.begin(), t.next_state.end());
    rewards_.push_back(t.reward);
    dones_.push_back(t.done);
  } else {
    std::copy(t.state.begin(), t.state.end(), states_.begin() + head_ * state_dim_);
    std::copy(t.action.begin(), t.action.end(), actions_.begin() + head_ * action_dim_);
    std::copy(t.next_state.begin(), t.next_state.end(), next_states_.begin() + head_ * state_dim_);
    rewards_[head_] = t.reward;
    dones_[head_] = t.done;
  }
  head_ = (head_ + 1) % capacity_;
  size_ = std::min(size_ + 1, capacity_);
}

Transition ReplayBuffer::slot(std::size_t p) const {
  Transition t;
  t.state.assign(states_.begin() + p * state_dim_, states_.begin() + (p + 1) * state_dim_);
  t.action.assign(actions_.begin() + p * action_dim_, actions_.begin() + (p + 1) * action_dim_);
  t.next_state.assign(next_states_.begin() + p * state_dim_, next_states_.begin() + (p + 1) * state_dim_);
  t.reward = rewards_[p];
  t.done = dones_[p] != 0;
  return t;
}

Transition ReplayBuffer::at(std::size_t i) const {
  if (i >= size_) throw ConfigError("replay buffer: index out of range");
  const std::size_t oldest = full() ? head_ : 0;
  return slot((oldest + i) % capacity_);
}

std::optional<std::vector<Transition>> ReplayBuffer::sample(std::size_t m, Rng& rng) const {
  if (size_ < m || m == 0) return std::nullopt;
  std::vector<Transition> batch;
  batch.reserve(m);
  for (std::size_t i = 0; i < m; ++i) batch.push_back(slot(uniform_index(rng, size_)));
  return batch;
}

}  // namespace sacnf
