#pragma once

// Policy-shape diagnostics: standardized KL against a Gaussian, k-means gap
// statistic for mode counting, sample moments and terminal-state histograms.

#include <Eigen/Core>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "sacnf/envs.hpp"
#include "sacnf/random.hpp"

namespace sacnf {

struct KlEstimate {
  double value = 0.0;
  double standard_error = 0.0;
};

// One state's samples (rows) and their log-densities. Each dimension is
// standardized to zero mean and unit variance, log-densities are moved along
// with the change of variables, and the result is the Monte-Carlo estimate of
// E[log p~(a) - log N(a; 0, I)] over the standardized sample. Throws
// DegenerateSampleError when a dimension has variance below 1e-12.
KlEstimate standardized_kl(const Eigen::MatrixXd& samples, std::span<const double> log_prob);

// Average of standardized_kl over states, n_actions draws per state (>= 50).
template <class Policy>
KlEstimate shape_kl(const Policy& policy, const std::vector<std::vector<double>>& states, int n_actions, Rng& rng);

struct KMeansResult {
  Eigen::MatrixXd centers;  // k x d
  std::vector<int> labels;
  double dispersion = 0.0;  // W_k: summed squared distance to the assigned center
  bool converged = true;
};

// Lloyd iterations from k-means++ seeds; the best of `restarts` runs.
KMeansResult kmeans(const Eigen::MatrixXd& samples, int k, Rng& rng, int restarts = 10, int max_iterations = 300);

struct GapResult {
  std::vector<double> gap;             // gap(k) for k = 1..k_max
  std::vector<double> standard_error;  // s_k = sd_k sqrt(1 + 1/B)
  std::vector<double> log_dispersion;
  int selected_k = 1;  // smallest k with gap(k) >= gap(k+1) - s_{k+1}
  int argmax_k = 1;
  bool converged = true;  // false if any k-means run hit the iteration cap
};

// Requires n >= 2 k_max. References are uniform over the sample's bounding box.
GapResult gap_statistic(const Eigen::MatrixXd& samples, int k_max, int n_refs, Rng& rng);

struct Moments {
  double skewness = 0.0;
  double excess_kurtosis = 0.0;
};

// Biased estimators m3 / m2^1.5 and m4 / m2^2 - 3. n >= 4.
Moments moments(std::span<const double> samples);

struct Histogram2d {
  Eigen::Vector2d lower;
  Eigen::Vector2d upper;
  int resolution = 0;
  Eigen::MatrixXd mass;  // resolution x resolution, (i, j) = (x cell, y cell); sums to 1
};

// Positions outside the grid land in the nearest boundary cell.
Histogram2d terminal_histogram(const std::vector<Eigen::Vector2d>& positions, const Eigen::Vector2d& lower,
                               const Eigen::Vector2d& upper, int resolution);

// Fraction of positions within `radius` of `center`.
double mass_within(const std::vector<Eigen::Vector2d>& positions, const Eigen::Vector2d& center, double radius);

struct AnalysisOptions {
  int kl_states = 50;
  int kl_actions = 250;
  int gap_samples = 250;
  int gap_k_max = 5;
  int gap_refs = 10;
  int rollouts = 400;
  int histogram_resolution = 12;
};

struct AnalysisReport {
  std::string run_id;
  std::int64_t env_step = 0;
  KlEstimate shape_kl;
  GapResult gap;
  std::vector<Moments> action_moments;  // per action dimension, at the start state
  Histogram2d terminal;
  std::vector<double> goal_mass;  // mass within radius 1 of each goal, when the task has goals
};

// Full post-training analysis. States for the KL come from stochastic
// rollouts; gap statistic and moments use actions at the start state. All
// randomness comes from `rng`.
template <class Policy>
AnalysisReport analyze_policy(const Policy& policy, const Environment& env, Rng& rng,
                              const AnalysisOptions& options = {});

nlohmann::json to_json(const AnalysisReport& report);

}  // namespace sacnf
