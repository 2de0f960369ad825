#include <cmath>
#include <numbers>

#include "doctest.h"
#include "sacnf/analysis.hpp"
#include "sacnf/gaussian_policy.hpp"
#include "sacnf/policy.hpp"

using namespace sacnf;

namespace {

Eigen::MatrixXd gaussian_cloud(Rng& rng, int n, const Eigen::RowVector2d& center, double sigma) {
  Eigen::MatrixXd x(n, 2);
  for (int i = 0; i < n; ++i) x.row(i) = center + sigma * Eigen::RowVector2d(standard_normal(rng), standard_normal(rng));
  return x;
}

Eigen::MatrixXd two_clusters(Rng& rng, int n) {
  Eigen::MatrixXd x(n, 2);
  x << gaussian_cloud(rng, n / 2, {-10.0, 0.0}, 0.5), gaussian_cloud(rng, n - n / 2, {10.0, 0.0}, 0.5);
  return x;
}

}  // namespace

TEST_CASE("shape_kl of a Gaussian policy is zero within its standard error") {
  Rng rng(1);
  PolicyArchitecture arch;
  arch.hidden = {8};
  arch.noise = NoiseModel::conditional;
  NFPolicy p(arch);
  p.init(rng);
  const auto g = GaussianPolicy::from_base_of(p);
  const std::vector<std::vector<double>> states{{0.2, -0.3}};
  const KlEstimate e = shape_kl(g, states, 2000, rng);
  CHECK(std::abs(e.value) < 3.0 * e.standard_error);
  CHECK(std::abs(e.value) < 0.01);
}

TEST_CASE("shape_kl of uniform samples is positive") {
  Rng rng(2);
  const int n = 5000;
  Eigen::MatrixXd x(n, 2);
  for (int i = 0; i < n; ++i) x.row(i) << uniform(rng, -1, 1), uniform(rng, -1, 1);
  const std::vector<double> log_prob(n, std::log(0.25));
  const KlEstimate e = standardized_kl(x, log_prob);
  // uniform on [-sqrt 3, sqrt 3] against N(0, 1), per dimension: 0.5 log(2 pi) + 0.5 - log(2 sqrt 3)
  const double exact = 2.0 * (0.5 * std::log(2.0 * std::numbers::pi) + 0.5 - std::log(2.0 * std::sqrt(3.0)));
  CHECK(e.value > 0.0);
  CHECK(e.value == doctest::Approx(exact).epsilon(0.05));
}

TEST_CASE("standardized_kl is invariant under affine maps of the actions") {
  Rng rng(3);
  const int n = 400;
  Eigen::MatrixXd x(n, 2);
  std::vector<double> log_prob(n);
  for (int i = 0; i < n; ++i) {
    // skewed sample with a known density: exponential x0, normal x1
    const double e = -std::log(1.0 - uniform01(rng));
    const double z = standard_normal(rng);
    x.row(i) << e, z;
    log_prob[i] = -e - 0.5 * z * z - 0.5 * std::log(2.0 * std::numbers::pi);
  }
  const double base = standardized_kl(x, log_prob).value;
  CHECK(base > 0.0);

  Eigen::MatrixXd y = x;
  y.col(0) = -3.0 * x.col(0).array() + 7.0;
  y.col(1) = 0.25 * x.col(1).array() - 1.0;
  std::vector<double> moved(log_prob);
  for (auto& lp : moved) lp -= std::log(3.0) + std::log(0.25);
  CHECK(standardized_kl(y, moved).value == doctest::Approx(base).epsilon(1e-10));
}

TEST_CASE("standardized_kl rejects degenerate samples") {
  Eigen::MatrixXd x(60, 2);
  x.col(0).setLinSpaced(60, 0.0, 1.0);
  x.col(1).setConstant(2.0);
  const std::vector<double> lp(60, 0.0);
  CHECK_THROWS_AS(standardized_kl(x, lp), DegenerateSampleError);
  Rng rng(1);
  PolicyArchitecture arch;
  CHECK_THROWS_AS(shape_kl(NFPolicy(arch), {{0.0, 0.0}}, 10, rng), ConfigError);
}

TEST_CASE("kmeans separates well-separated clusters") {
  Rng rng(4);
  const auto x = two_clusters(rng, 200);
  const auto fit = kmeans(x, 2, rng);
  CHECK(fit.converged);
  CHECK(fit.labels[0] != fit.labels[199]);
  for (int i = 0; i < 100; ++i) CHECK(fit.labels[i] == fit.labels[0]);
  CHECK(fit.dispersion < 200 * 2 * 0.5 * 0.5 * 1.5);
}

TEST_CASE("gap statistic") {
  SUBCASE("two clusters: argmax at k = 2") {
    Rng rng(5);
    const auto g = gap_statistic(two_clusters(rng, 200), 5, 10, rng);
    CHECK(g.argmax_k == 2);
    CHECK(g.selected_k == 2);
  }
  SUBCASE("one cluster: the one-cluster rule holds") {
    Rng rng(6);
    const auto g = gap_statistic(gaussian_cloud(rng, 200, {1.0, -2.0}, 1.0), 5, 10, rng);
    CHECK(g.gap[0] >= g.gap[1] - g.standard_error[1]);
    CHECK(g.selected_k == 1);
  }
  SUBCASE("minimal input gives k_max finite values") {
    Rng rng(7);
    const auto g = gap_statistic(gaussian_cloud(rng, 8, {0.0, 0.0}, 1.0), 4, 5, rng);
    REQUIRE(g.gap.size() == 4);
    for (double v : g.gap) CHECK(std::isfinite(v));
    CHECK_THROWS_AS(gap_statistic(gaussian_cloud(rng, 7, {0.0, 0.0}, 1.0), 4, 5, rng), ConfigError);
  }
  SUBCASE("rotation leaves the selected k unchanged") {
    Rng rng(8);
    const auto x = two_clusters(rng, 200);
    const int reference = gap_statistic(x, 4, 10, rng).argmax_k;
    for (int r = 0; r < 5; ++r) {
      const double t = uniform(rng, 0.0, 2.0 * std::numbers::pi);
      Eigen::Matrix2d rot;
      rot << std::cos(t), -std::sin(t), std::sin(t), std::cos(t);
      const Eigen::MatrixXd y = x * rot.transpose();
      CHECK(gap_statistic(y, 4, 10, rng).argmax_k == reference);
    }
  }
}

TEST_CASE("moments") {
  Rng rng(9);
  const int n = 100000;
  std::vector<double> normal(n), uni(n), expo(n);
  for (int i = 0; i < n; ++i) {
    normal[i] = standard_normal(rng);
    uni[i] = uniform(rng, -1, 1);
    expo[i] = -std::log(1.0 - uniform01(rng));
  }
  const auto mn = moments(normal);
  CHECK(std::abs(mn.skewness) < 0.05);
  CHECK(std::abs(mn.excess_kurtosis) < 0.05);
  CHECK(moments(uni).excess_kurtosis == doctest::Approx(-1.2).epsilon(0.02));
  CHECK(moments(expo).skewness == doctest::Approx(2.0).epsilon(0.05));

  std::vector<double> flipped(expo);
  for (auto& x : flipped) x = -x;
  const auto a = moments(expo);
  const auto b = moments(flipped);
  CHECK(b.skewness == -a.skewness);
  CHECK(b.excess_kurtosis == a.excess_kurtosis);

  CHECK_THROWS_AS(moments(std::vector<double>(10, 3.0)), DegenerateSampleError);
  CHECK_THROWS_AS(moments(std::vector<double>{1.0, 2.0, 3.0}), ConfigError);
}

TEST_CASE("terminal_histogram") {
  const Eigen::Vector2d lo{-6.0, -6.0}, hi{6.0, 6.0};
  SUBCASE("single cell") {
    const std::vector<Eigen::Vector2d> p(7, Eigen::Vector2d(0.3, 0.3));
    const auto h = terminal_histogram(p, lo, hi, 12);
    CHECK(h.mass(6, 6) == 1.0);
    CHECK(h.mass.sum() == 1.0);
  }
  SUBCASE("uniform positions spread evenly") {
    Rng rng(10);
    std::vector<Eigen::Vector2d> p;
    for (int i = 0; i < 10000; ++i) p.emplace_back(uniform(rng, -6, 6), uniform(rng, -6, 6));
    const auto h = terminal_histogram(p, lo, hi, 12);
    CHECK(h.mass.maxCoeff() < 3.0 * h.mass.mean());
    CHECK(h.mass.sum() == doctest::Approx(1.0));
  }
  SUBCASE("out-of-grid positions go to the nearest boundary cell") {
    const std::vector<Eigen::Vector2d> p{{-100.0, 0.5}, {6.0, 100.0}};
    const auto h = terminal_histogram(p, lo, hi, 12);
    CHECK(h.mass(0, 6) == 0.5);
    CHECK(h.mass(11, 11) == 0.5);
  }
  CHECK_THROWS_AS(terminal_histogram({}, lo, hi, 12), ConfigError);
  CHECK(mass_within({{0.0, 0.0}, {5.0, 0.0}, {5.5, 0.5}}, {5.0, 0.0}, 1.0) == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("analysis report round-trips through JSON") {
  Rng rng(11);
  PolicyArchitecture arch;
  arch.hidden = {8};
  arch.flows.assign(2, FlowFamily::radial);
  NFPolicy p(arch);
  p.init(rng);
  AnalysisOptions opt;
  opt.kl_states = 5;
  opt.kl_actions = 60;
  opt.gap_samples = 40;
  opt.gap_refs = 3;
  opt.rollouts = 20;
  const Environment env(EnvKind::four_goal);
  auto report = analyze_policy(p, env, rng, opt);
  report.run_id = "seed-11";
  const auto j = to_json(report);
  CHECK(j["run_id"] == "seed-11");
  CHECK(j["gap_statistic"]["gap"].size() == 5);
  CHECK(j["goal_mass"].size() == 4);
  CHECK(j["terminal_histogram"]["mass"].size() == 12);
  CHECK(std::abs(j["shape_kl"]["value"].get<double>()) < 0.05);
}
