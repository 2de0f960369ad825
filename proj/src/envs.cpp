#include "sacnf/envs.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "sacnf/errors.hpp"

namespace sacnf {

std::string to_string(EnvKind kind) {
  switch (kind) {
    case EnvKind::four_goal: return "four_goal";
    case EnvKind::sparse: return "sparse";
    default: return "deceptive";
  }
}

Environment::Environment(EnvKind kind) {
  spec_.kind = kind;
  spec_.name = to_string(kind);
  switch (kind) {
    case EnvKind::deceptive: spec_.horizon = 100; break;
    case EnvKind::four_goal: spec_.horizon = 20; break;
    case EnvKind::sparse: spec_.horizon = 50; break;
  }
}

Environment Environment::from_name(const std::string& name) {
  if (name == "deceptive") return Environment(EnvKind::deceptive);
  if (name == "four_goal") return Environment(EnvKind::four_goal);
  if (name == "sparse") return Environment(EnvKind::sparse);
  throw ConfigError("unknown environment '" + name + "'");
}

PointState Environment::reset(Rng&) const { return reset(); }

PointState Environment::reset() const {
  PointState s;
  s.position = spec_.kind == EnvKind::deceptive ? deceptive_map::kStart : Eigen::Vector2d::Zero();
  s.steps = 0;
  return s;
}

std::vector<Eigen::Vector2d> Environment::goals() const {
  if (spec_.kind == EnvKind::four_goal)
    return {{kFourGoalDistance, 0.0}, {0.0, kFourGoalDistance}, {-kFourGoalDistance, 0.0}, {0.0, -kFourGoalDistance}};
  if (spec_.kind == EnvKind::deceptive) return {deceptive_map::kGoalCenter};
  return {};
}

double Environment::reward_at(const Eigen::Vector2d& p) const {
  switch (spec_.kind) {
    case EnvKind::deceptive: {
      using namespace deceptive_map;
      if ((p - kGoalCenter).norm() <= kGoalRadius) return kGoalReward;
      if (p.norm() <= kPitRadius) return kPitReward;
      if (p.x() >= kStripMinX && p.x() <= kStripMaxX) return kStripReward;
      return 0.0;
    }
    case EnvKind::four_goal: {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& g : goals()) {
        const double dx = p.x() - g.x();
        const double dy = p.y() - g.y();
        best = std::min(best, std::sqrt(dx * dx + dy * dy));
      }
      return -best;
    }
    case EnvKind::sparse: return p.norm() > kSparseThreshold ? 1.0 : 0.0;
  }
  return 0.0;
}

bool Environment::is_terminal(const Eigen::Vector2d& p) const {
  if (spec_.kind != EnvKind::deceptive) return false;
  using namespace deceptive_map;
  return (p - kGoalCenter).norm() <= kGoalRadius || p.norm() <= kPitRadius;
}

StepResult Environment::step(const PointState& state, std::span<const double> action) const {
  if (action.size() != 2) throw ConfigError("step: action must be 2-dimensional");
  if (!std::isfinite(action[0]) || !std::isfinite(action[1])) throw NumericError("step: non-finite action");
  const double lim = spec_.room_half_extent;
  StepResult out;
  for (int i = 0; i < 2; ++i) {
    const double a = std::clamp(action[i], spec_.action_low, spec_.action_high);
    out.state.position[i] = std::clamp(state.position[i] + a, -lim, lim);
  }
  out.state.steps = state.steps + 1;
  out.reward = reward_at(out.state.position);
  out.terminal = is_terminal(out.state.position);
  out.truncated = !out.terminal && out.state.steps >= spec_.horizon;
  return out;
}

std::vector<double> Environment::observe(const PointState& state) const {
  return {state.position.x() / spec_.room_half_extent, state.position.y() / spec_.room_half_extent};
}

void write_reward_field(const Environment& env, const std::string& path, int resolution) {
  if (resolution < 2) throw ConfigError("reward field resolution must be at least 2");
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << "x,y,r\n";
  const double lim = env.spec().room_half_extent;
  const double step = 2.0 * lim / (resolution - 1);
  char line[96];
  for (int i = 0; i < resolution; ++i) {
    for (int j = 0; j < resolution; ++j) {
      const Eigen::Vector2d p{-lim + i * step, -lim + j * step};
      std::snprintf(line, sizeof line, "%.17g,%.17g,%.17g\n", p.x(), p.y(), env.reward_at(p));
      out << line;
    }
  }
  if (!out) throw IoError("write failed for '" + path + "'");
}

}  // namespace sacnf
