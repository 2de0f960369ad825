#pragma once

// Point-mass navigation tasks in the room [-6, 6]^2 with dynamics p' = clip(p + a),
// a in [-1, 1]^2.
//
//   deceptive  start (4.5, 0), horizon 100. Strip x in [3.5, 5.5] pays +0.5 per
//              step; a pit (disk r=2.5 at the origin) ends the episode at -50; a
//              goal disk (r=0.75 at (-4.5, 0)) ends it at +100.
//   four_goal  start at the origin, horizon 20, goals at (+-5, 0), (0, +-5),
//              reward -distance to the closest goal.
//   sparse     start at the origin, horizon 50, reward +1 whenever |p| > 0.6.

#include <Eigen/Core>
#include <span>
#include <string>
#include <vector>

#include "sacnf/errors.hpp"
#include "sacnf/random.hpp"

namespace sacnf {

enum class EnvKind { deceptive, four_goal, sparse };

struct EnvSpec {
  std::string name;
  EnvKind kind = EnvKind::deceptive;
  double action_low = -1.0;
  double action_high = 1.0;
  double room_half_extent = 6.0;
  int horizon = 100;
};

struct PointState {
  Eigen::Vector2d position = Eigen::Vector2d::Zero();
  int steps = 0;
};

struct StepResult {
  PointState state;
  double reward = 0.0;
  bool terminal = false;   // reached an absorbing region
  bool truncated = false;  // horizon reached
  bool done() const { return terminal || truncated; }
};

namespace deceptive_map {
inline constexpr double kStripMinX = 3.5;
inline constexpr double kStripMaxX = 5.5;
inline constexpr double kStripReward = 0.5;
inline constexpr double kPitRadius = 2.5;
inline constexpr double kPitReward = -50.0;
inline constexpr double kGoalRadius = 0.75;
inline constexpr double kGoalReward = 100.0;
inline const Eigen::Vector2d kGoalCenter{-4.5, 0.0};
inline const Eigen::Vector2d kStart{4.5, 0.0};
}  // namespace deceptive_map

inline constexpr double kFourGoalDistance = 5.0;
inline constexpr double kSparseThreshold = 0.6;

class Environment {
 public:
  explicit Environment(EnvKind kind);
  static Environment from_name(const std::string& name);

  const EnvSpec& spec() const { return spec_; }
  const std::string& name() const { return spec_.name; }
  int observation_dim() const { return 2; }
  int action_dim() const { return 2; }

  // The start state is fixed for every task; rng is accepted for interface
  // uniformity and left untouched.
  PointState reset(Rng& rng) const;
  PointState reset() const;

  // Clips the action to the bounds, integrates, clips to the room. Throws
  // NumericError on a non-finite action.
  StepResult step(const PointState& state, std::span<const double> action) const;

  double reward_at(const Eigen::Vector2d& p) const;
  bool is_terminal(const Eigen::Vector2d& p) const;

  // Network input: position scaled into [-1, 1]^2.
  std::vector<double> observe(const PointState& state) const;

  std::vector<Eigen::Vector2d> goals() const;

 private:
  EnvSpec spec_;
};

std::string to_string(EnvKind kind);

// Samples reward_at on a resolution x resolution grid spanning the room and
// writes "x,y,r" rows. Throws IoError when the file cannot be written.
void write_reward_field(const Environment& env, const std::string& path, int resolution = 121);

}  // namespace sacnf
