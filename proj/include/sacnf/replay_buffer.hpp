#pragma once

#include <optional>
#include <span>
#include <vector>

#include "sacnf/random.hpp"

namespace sacnf {

struct Transition {
  std::vector<double> state;
  std::vector<double> action;
  double reward = 0.0;
  std::vector<double> next_state;
  bool done = false;  // absorbing transition: no bootstrap through next_state
};

// Fixed-capacity FIFO ring over flat storage.
class ReplayBuffer {
 public:
  ReplayBuffer(std::size_t capacity, int state_dim, int action_dim);

  // Throws ConfigError on dimension mismatch or non-finite reward.
  void push(const Transition& t);

  // m transitions uniformly with replacement; nullopt when fewer than m are stored.
  std::optional<std::vector<Transition>> sample(std::size_t m, Rng& rng) const;

  // i-th oldest stored transition.
  Transition at(std::size_t i) const;

  std::size_t size() const { return size_; }
  std::size_t capacity() const { return capacity_; }
  bool full() const { return size_ == capacity_; }

 private:
  Transition slot(std::size_t physical) const;

  std::size_t capacity_;
  std::size_t state_dim_;
  std::size_t action_dim_;
  std::size_t head_ = 0;  // next write position
  std::size_t size_ = 0;
  std::vector<double> states_, actions_, rewards_, next_states_;
  std::vector<unsigned char> dones_;
};

}  // namespace sacnf
