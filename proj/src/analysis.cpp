#include "sacnf/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "sacnf/errors.hpp"
#include "sacnf/gaussian_policy.hpp"
#include "sacnf/policy.hpp"

namespace sacnf {

KlEstimate standardized_kl(const Eigen::MatrixXd& samples, std::span<const double> log_prob) {
  const auto n = samples.rows();
  const auto d = samples.cols();
  if (n < 2) throw ConfigError("standardized_kl: need at least two samples");
  if (static_cast<Eigen::Index>(log_prob.size()) != n) throw ConfigError("standardized_kl: one log-density per sample");

  const Eigen::RowVectorXd mean = samples.colwise().mean();
  const Eigen::MatrixXd centered = samples.rowwise() - mean;
  const Eigen::RowVectorXd var = centered.colwise().squaredNorm() / static_cast<double>(n);
  for (Eigen::Index k = 0; k < d; ++k)
    if (!(var(k) >= 1e-12)) throw DegenerateSampleError("sample variance below 1e-12 in dimension " + std::to_string(k));
  const Eigen::RowVectorXd sd = var.cwiseSqrt();
  const double log_jacobian = sd.array().log().sum();
  const Eigen::MatrixXd standardized = centered.array().rowwise() / sd.array();
  const double log_norm = 0.5 * static_cast<double>(d) * std::log(2.0 * std::numbers::pi);

  double sum = 0.0, sum_sq = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double diff = (log_prob[i] + log_jacobian) - (-0.5 * standardized.row(i).squaredNorm() - log_norm);
    sum += diff;
    sum_sq += diff * diff;
  }
  const double mean_diff = sum / static_cast<double>(n);
  const double var_diff = std::max(0.0, sum_sq / static_cast<double>(n) - mean_diff * mean_diff);
  return {mean_diff, std::sqrt(var_diff / static_cast<double>(n - 1))};
}

template <class Policy>
KlEstimate shape_kl(const Policy& policy, const std::vector<std::vector<double>>& states, int n_actions, Rng& rng) {
  if (n_actions < 50) throw ConfigError("shape_kl: n_actions must be at least 50");
  if (states.empty()) throw ConfigError("shape_kl: no states");
  const int d = policy.action_dim();
  double total = 0.0, total_var = 0.0;
  for (const auto& state : states) {
    Eigen::MatrixXd samples(n_actions, d);
    std::vector<double> log_prob(static_cast<std::size_t>(n_actions));
    for (int i = 0; i < n_actions; ++i) {
      const auto draw = policy.sample_action(state, rng);
      for (int k = 0; k < d; ++k) samples(i, k) = draw.action[k];
      log_prob[i] = draw.log_prob;
    }
    const KlEstimate e = standardized_kl(samples, log_prob);
    total += e.value;
    total_var += e.standard_error * e.standard_error;
  }
  const double s = static_cast<double>(states.size());
  return {total / s, std::sqrt(total_var) / s};
}

namespace {

double nearest_sq(const Eigen::MatrixXd& centers, Eigen::Index count, const Eigen::RowVectorXd& x, int* label) {
  double best = std::numeric_limits<double>::infinity();
  for (Eigen::Index c = 0; c < count; ++c) {
    const double dist = (centers.row(c) - x).squaredNorm();
    if (dist < best) {
      best = dist;
      if (label) *label = static_cast<int>(c);
    }
  }
  return best;
}

KMeansResult kmeans_once(const Eigen::MatrixXd& x, int k, Rng& rng, int max_iterations) {
  const auto n = x.rows();
  KMeansResult r;
  r.centers.resize(k, x.cols());
  r.centers.row(0) = x.row(static_cast<Eigen::Index>(uniform_index(rng, static_cast<std::size_t>(n))));
  std::vector<double> d2(static_cast<std::size_t>(n));
  for (int c = 1; c < k; ++c) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) total += d2[i] = nearest_sq(r.centers, c, x.row(i), nullptr);
    Eigen::Index pick = 0;
    if (total > 0.0) {
      double u = uniform01(rng) * total;
      for (pick = 0; pick + 1 < n; ++pick) {
        u -= d2[pick];
        if (u < 0.0) break;
      }
    } else {
      pick = static_cast<Eigen::Index>(uniform_index(rng, static_cast<std::size_t>(n)));
    }
    r.centers.row(c) = x.row(pick);
  }

  r.labels.assign(static_cast<std::size_t>(n), -1);
  r.converged = false;
  for (int it = 0; it < max_iterations; ++it) {
    bool changed = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      int label = 0;
      nearest_sq(r.centers, k, x.row(i), &label);
      if (label != r.labels[i]) {
        r.labels[i] = label;
        changed = true;
      }
    }
    if (!changed) {
      r.converged = true;
      break;
    }
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, x.cols());
    std::vector<int> counts(static_cast<std::size_t>(k), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      sums.row(r.labels[i]) += x.row(i);
      ++counts[r.labels[i]];
    }
    for (int c = 0; c < k; ++c)
      if (counts[c] > 0) r.centers.row(c) = sums.row(c) / counts[c];
  }
  r.dispersion = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) r.dispersion += (x.row(i) - r.centers.row(r.labels[i])).squaredNorm();
  return r;
}

}  // namespace

KMeansResult kmeans(const Eigen::MatrixXd& samples, int k, Rng& rng, int restarts, int max_iterations) {
  if (k < 1 || k > samples.rows()) throw ConfigError("kmeans: need 1 <= k <= n");
  KMeansResult best;
  best.dispersion = std::numeric_limits<double>::infinity();
  bool all_converged = true;
  for (int r = 0; r < std::max(1, restarts); ++r) {
    KMeansResult run = kmeans_once(samples, k, rng, max_iterations);
    all_converged = all_converged && run.converged;
    if (run.dispersion < best.dispersion) best = std::move(run);
  }
  best.converged = all_converged;
  return best;
}

GapResult gap_statistic(const Eigen::MatrixXd& samples, int k_max, int n_refs, Rng& rng) {
  if (k_max < 1) throw ConfigError("gap_statistic: k_max must be positive");
  if (samples.rows() < 2 * k_max) throw ConfigError("gap_statistic: need at least 2 k_max samples");
  if (n_refs < 1) throw ConfigError("gap_statistic: n_refs must be positive");
  const auto n = samples.rows();
  const auto d = samples.cols();
  const Eigen::RowVectorXd lo = samples.colwise().minCoeff();
  const Eigen::RowVectorXd hi = samples.colwise().maxCoeff();
  // log W_k of a zero-dispersion clustering is -inf; floor it.
  auto safe_log = [](double w) { return std::log(std::max(w, 1e-300)); };

  GapResult out;
  for (int k = 1; k <= k_max; ++k) {
    const KMeansResult fit = kmeans(samples, k, rng);
    out.converged = out.converged && fit.converged;
    const double log_w = safe_log(fit.dispersion);
    std::vector<double> ref_logs;
    for (int b = 0; b < n_refs; ++b) {
      Eigen::MatrixXd ref(n, d);
      for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < d; ++j) ref(i, j) = uniform(rng, lo(j), hi(j));
      const KMeansResult ref_fit = kmeans(ref, k, rng);
      out.converged = out.converged && ref_fit.converged;
      ref_logs.push_back(safe_log(ref_fit.dispersion));
    }
    double mean = 0.0;
    for (double v : ref_logs) mean += v;
    mean /= n_refs;
    double var = 0.0;
    for (double v : ref_logs) var += (v - mean) * (v - mean);
    var /= n_refs;
    out.log_dispersion.push_back(log_w);
    out.gap.push_back(mean - log_w);
    out.standard_error.push_back(std::sqrt(var) * std::sqrt(1.0 + 1.0 / n_refs));
  }
  out.selected_k = k_max;
  for (int k = 1; k < k_max; ++k)
    if (out.gap[k - 1] >= out.gap[k] - out.standard_error[k]) {
      out.selected_k = k;
      break;
    }
  out.argmax_k = static_cast<int>(std::max_element(out.gap.begin(), out.gap.end()) - out.gap.begin()) + 1;
  return out;
}

Moments moments(std::span<const double> samples) {
  if (samples.size() < 4) throw ConfigError("moments: need at least four samples");
  const double n = static_cast<double>(samples.size());
  double mean = 0.0;
  for (double x : samples) mean += x;
  mean /= n;
  double m2 = 0.0, m3 = 0.0, m4 = 0.0;
  for (double x : samples) {
    const double c = x - mean;
    const double c2 = c * c;
    m2 += c2;
    m3 += c2 * c;
    m4 += c2 * c2;
  }
  m2 /= n;
  m3 /= n;
  m4 /= n;
  if (!(std::sqrt(m2) > 1e-12 * std::max(1.0, std::abs(mean)))) throw DegenerateSampleError("moments: zero variance");
  return {m3 / std::pow(m2, 1.5), m4 / (m2 * m2) - 3.0};
}

Histogram2d terminal_histogram(const std::vector<Eigen::Vector2d>& positions, const Eigen::Vector2d& lower,
                               const Eigen::Vector2d& upper, int resolution) {
  if (positions.empty()) throw ConfigError("terminal_histogram: no positions");
  if (resolution < 1) throw ConfigError("terminal_histogram: resolution must be positive");
  if (!(upper.x() > lower.x() && upper.y() > lower.y())) throw ConfigError("terminal_histogram: empty grid");
  Histogram2d h{lower, upper, resolution, Eigen::MatrixXd::Zero(resolution, resolution)};
  auto cell = [&](double v, double lo, double hi) {
    const double t = std::floor((v - lo) / (hi - lo) * resolution);
    return static_cast<int>(std::clamp(t, 0.0, static_cast<double>(resolution - 1)));
  };
  for (const auto& p : positions) h.mass(cell(p.x(), lower.x(), upper.x()), cell(p.y(), lower.y(), upper.y())) += 1.0;
  h.mass /= static_cast<double>(positions.size());
  return h;
}

double mass_within(const std::vector<Eigen::Vector2d>& positions, const Eigen::Vector2d& center, double radius) {
  if (positions.empty()) return 0.0;
  std::size_t hits = 0;
  for (const auto& p : positions) hits += (p - center).norm() <= radius;
  return static_cast<double>(hits) / static_cast<double>(positions.size());
}

template <class Policy>
AnalysisReport analyze_policy(const Policy& policy, const Environment& env, Rng& rng, const AnalysisOptions& options) {
  AnalysisReport report;
  const int d = policy.action_dim();

  // Rollouts give both the terminal positions and a pool of visited states.
  std::vector<Eigen::Vector2d> terminal;
  std::vector<std::vector<double>> visited;
  for (int e = 0; e < options.rollouts; ++e) {
    PointState s = env.reset(rng);
    for (;;) {
      visited.push_back(env.observe(s));
      const auto draw = policy.sample_action(env.observe(s), rng);
      const StepResult r = env.step(s, draw.action);
      s = r.state;
      if (r.done()) break;
    }
    terminal.push_back(s.position);
  }
  std::vector<std::vector<double>> kl_states;
  for (int i = 0; i < options.kl_states; ++i) kl_states.push_back(visited[uniform_index(rng, visited.size())]);
  report.shape_kl = shape_kl(policy, kl_states, options.kl_actions, rng);

  const auto start = env.observe(env.reset());
  Eigen::MatrixXd actions(options.gap_samples, d);
  for (int i = 0; i < options.gap_samples; ++i) {
    const auto a = policy.sample_action(start, rng).action;
    for (int k = 0; k < d; ++k) actions(i, k) = a[k];
  }
  report.gap = gap_statistic(actions, options.gap_k_max, options.gap_refs, rng);
  for (int k = 0; k < d; ++k) {
    std::vector<double> column(actions.col(k).data(), actions.col(k).data() + actions.rows());
    try {
      report.action_moments.push_back(moments(column));
    } catch (const DegenerateSampleError&) {
      report.action_moments.push_back({std::nan(""), std::nan("")});
    }
  }

  const double lim = env.spec().room_half_extent;
  report.terminal = terminal_histogram(terminal, {-lim, -lim}, {lim, lim}, options.histogram_resolution);
  if (env.spec().kind == EnvKind::four_goal)
    for (const auto& g : env.goals()) report.goal_mass.push_back(mass_within(terminal, g, 1.0));
  return report;
}

nlohmann::json to_json(const AnalysisReport& report) {
  using nlohmann::json;
  json moments_json = json::array();
  for (const auto& m : report.action_moments) moments_json.push_back({{"skewness", m.skewness}, {"excess_kurtosis", m.excess_kurtosis}});
  json mass = json::array();
  for (Eigen::Index i = 0; i < report.terminal.mass.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < report.terminal.mass.cols(); ++j) row.push_back(report.terminal.mass(i, j));
    mass.push_back(row);
  }
  return {{"run_id", report.run_id},
          {"env_step", report.env_step},
          {"shape_kl", {{"value", report.shape_kl.value}, {"standard_error", report.shape_kl.standard_error}}},
          {"gap_statistic",
           {{"gap", report.gap.gap},
            {"standard_error", report.gap.standard_error},
            {"selected_k", report.gap.selected_k},
            {"argmax_k", report.gap.argmax_k},
            {"converged", report.gap.converged}}},
          {"moments", moments_json},
          {"terminal_histogram",
           {{"lower", {report.terminal.lower.x(), report.terminal.lower.y()}},
            {"upper", {report.terminal.upper.x(), report.terminal.upper.y()}},
            {"resolution", report.terminal.resolution},
            {"mass", mass}}},
          {"goal_mass", report.goal_mass}};
}

template KlEstimate shape_kl(const NFPolicy&, const std::vector<std::vector<double>>&, int, Rng&);
template KlEstimate shape_kl(const GaussianPolicy&, const std::vector<std::vector<double>>&, int, Rng&);
template AnalysisReport analyze_policy(const NFPolicy&, const Environment&, Rng&, const AnalysisOptions&);
template AnalysisReport analyze_policy(const GaussianPolicy&, const Environment&, Rng&, const AnalysisOptions&);

}  // namespace sacnf
