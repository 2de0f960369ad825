// Acceptance run: one PASS/FAIL line per criterion, exit status = number of failures.

#include <chrono>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <functional>
#include <numbers>
#include <set>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "oracles.hpp"
#include "sacnf/analysis.hpp"
#include "sacnf/config.hpp"
#include "sacnf/runner.hpp"
#include "sacnf/trainer.hpp"

using namespace sacnf;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Settings {
  std::string config_dir = SACNF_CONFIG_DIR;
  std::string out_dir = "acceptance_runs";
  int jobs = 1;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

ExperimentConfig load(const Settings& s, const std::string& name) {
  ExperimentConfig c = load_config((fs::path(s.config_dir) / (name + ".txt")).string());
  c.output_dir = (fs::path(s.out_dir) / name).string();
  c.analysis = false;
  return c;
}

std::vector<double> normal_vector(Rng& rng, std::size_t n, double scale) {
  std::vector<double> v(n);
  for (auto& x : v) x = scale * standard_normal(rng);
  return v;
}

// ---- 1: analytic log-det against the finite-difference Jacobian ------------

Outcome flow_correctness() {
  Rng rng(101);
  const int dims[] = {1, 2, 6};
  double worst = 0.0;
  int checked = 0;
  for (int i = 0; i < 300; ++i) {
    const int d = dims[(i / 3) % 3];
    std::vector<FlowFamily> layers;
    if (i % 3 == 0) layers = {FlowFamily::radial};
    else if (i % 3 == 1) layers = {FlowFamily::planar};
    else
      for (int l = 0; l < 3; ++l) layers.push_back(uniform01(rng) < 0.5 ? FlowFamily::radial : FlowFamily::planar);
    FlowChain chain(d, layers);
    chain.params = normal_vector(rng, chain.param_count(), 1.0);
    const auto z = normal_vector(rng, static_cast<std::size_t>(d), 1.5);

    const double analytic = chain.apply(z).log_det;
    const auto jac = oracle::finite_difference_jacobian(
        [&](std::span<const double> x) { return chain.apply(x).z; }, z, 1e-6);
    worst = std::max(worst, oracle::relative_error(analytic, oracle::log_abs_det(jac)));
    ++checked;
  }
  return {worst < 1e-5, fmt("%d pairs, max relative error %.2e (limit 1e-5)", checked, worst)};
}

// ---- 2: loss gradients against central differences -------------------------

std::vector<Transition> random_batch(Rng& rng, std::size_t m) {
  std::vector<Transition> batch;
  for (std::size_t i = 0; i < m; ++i) {
    Transition t;
    t.state = {uniform(rng, -1, 1), uniform(rng, -1, 1)};
    t.action = {uniform(rng, -1, 1), uniform(rng, -1, 1)};
    t.reward = standard_normal(rng);
    t.next_state = {uniform(rng, -1, 1), uniform(rng, -1, 1)};
    t.done = uniform01(rng) < 0.2;
    batch.push_back(t);
  }
  return batch;
}

Outcome gradient_suite() {
  Rng rng(202);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    PolicyArchitecture arch;
    arch.hidden = {8};
    arch.noise = trial % 2 ? NoiseModel::conditional : NoiseModel::average;
    for (int l = 0; l < trial % 4; ++l) arch.flows.push_back(l % 2 ? FlowFamily::planar : FlowFamily::radial);
    TrainerConfig config;
    config.critic_hidden = {12, 12};
    config.critic_activation = trial % 3 ? Activation::tanh : Activation::relu;
    auto learner = make_learner(arch, config, 300 + static_cast<std::uint64_t>(trial));
    // Random flow parameters, away from the identity.
    learner.policy.flows.params = normal_vector(rng, learner.policy.flows.param_count(), 0.7);
    const auto batch = random_batch(rng, 16);
    const auto noise = draw_batch_noise(rng, batch.size(), 2);
    const auto& c = learner.critics;
    const NFPolicy& policy = learner.policy;
    const double alpha = config.alpha_ent;

    auto track = [&](std::span<const double> analytic, std::span<const double> fd) {
      worst = std::max(worst, oracle::max_relative_error(analytic, fd));
    };
    track(learner.critic_gradient(batch, c.q).grad,
          oracle::finite_difference_gradient(
              [&](std::span<const double> p) { return q_loss<double>(batch, c.q, p, c.v_target, config.gamma); },
              c.q.params));
    track(learner.value_gradient(batch, noise).grad,
          oracle::finite_difference_gradient(
              [&](std::span<const double> p) { return v_loss<double>(batch, c.v, p, c, policy, alpha, noise); },
              c.v.params));
    const auto g = learner.policy_gradient(batch, noise);
    const auto view = policy.view();
    auto pi_at = [&](std::span<const double> mean, std::span<const double> scale, std::span<const double> flow) {
      return pi_loss<double>(batch, c, policy, PolicyView<double>{mean, scale, flow}, alpha, noise).loss;
    };
    track(g.mean, oracle::finite_difference_gradient(
                      [&](std::span<const double> p) { return pi_at(p, view.scale, view.flow); }, policy.mean_net.params));
    track(g.scale, oracle::finite_difference_gradient(
                       [&](std::span<const double> p) { return pi_at(view.mean, p, view.flow); }, policy.scale_params()));
    if (!policy.flows.empty())
      track(g.flow, oracle::finite_difference_gradient(
                        [&](std::span<const double> p) { return pi_at(view.mean, view.scale, p); }, policy.flows.params));
  }
  return {worst < 1e-4, fmt("20 minibatches, max relative error %.2e (limit 1e-4)", worst)};
}

// ---- 3: radial invertibility -------------------------------------------------

Outcome invertibility() {
  Rng rng(303);
  const int dims[] = {1, 2, 6};
  double worst = 0.0;
  int constraint_violations = 0;
  for (int i = 0; i < 100; ++i) {
    const int d = dims[i % 3];
    // Wide raw range, including saturated softplus arguments.
    auto raw = normal_vector(rng, static_cast<std::size_t>(d) + 2, 1.0);
    raw[d] = uniform(rng, -30.0, 30.0);
    raw[d + 1] = uniform(rng, -30.0, 30.0);
    const auto c = constrain_radial<double>(raw);
    if (!(c.beta >= -c.alpha)) ++constraint_violations;
    const auto z = normal_vector(rng, static_cast<std::size_t>(d), 2.0);
    const auto y = radial_apply<double>(raw, z).z;
    const auto back = oracle::radial_inverse(c.center, c.alpha, c.beta, y);
    double err = 0.0;
    for (int k = 0; k < d; ++k) err = std::max(err, std::abs(back[k] - z[k]));
    worst = std::max(worst, err);
  }
  return {worst < 1e-6 && constraint_violations == 0,
          fmt("100 layers, max reconstruction error %.2e (limit 1e-6), beta < -alpha in %d", worst,
              constraint_violations)};
}

// ---- 4: zero flows reproduce plain Gaussian SAC bitwise ------------------------

Outcome sac_reduction() {
  PolicyArchitecture arch;
  arch.hidden = {16};
  TrainerConfig config;
  config.critic_hidden = {32, 32};
  config.batch_size = 64;
  config.warmup_steps = 200;
  config.total_env_steps = 1200;  // learning steps 200..1199
  config.eval_every = 0;
  const Environment env(EnvKind::deceptive);
  const std::uint64_t seed = 404;

  auto flow_learner = make_learner(arch, config, seed);
  SacLearner<GaussianPolicy> gauss_learner(GaussianPolicy::from_base_of(flow_learner.policy), flow_learner.critics,
                                           config);
  const TrainingLog a = train(flow_learner, config, env, seed);
  const TrainingLog b = train(gauss_learner, config, env, seed);

  std::size_t mismatches = a.step_losses.size() == b.step_losses.size() ? 0 : 1;
  for (std::size_t i = 0; i < std::min(a.step_losses.size(), b.step_losses.size()); ++i)
    if (std::memcmp(&a.step_losses[i], &b.step_losses[i], sizeof(StepLosses)) != 0) ++mismatches;
  const bool same_params = flow_learner.policy.mean_net.params == gauss_learner.policy.mean_net.params &&
                           flow_learner.policy.log_scale == gauss_learner.policy.log_scale &&
                           flow_learner.critics.q.params == gauss_learner.critics.q.params;
  return {a.step_losses.size() == 1000 && mismatches == 0 && same_params,
          fmt("%zu learning steps, %zu differing loss records, final parameters %s", a.step_losses.size(), mismatches,
              same_params ? "identical" : "differ")};
}

// ---- 5: deceptive room -----------------------------------------------------------

std::string list_seeds(const std::vector<RunResult>& runs, const std::function<bool(const RunResult&)>& pred) {
  std::string out;
  for (const auto& r : runs)
    if (pred(r)) out += (out.empty() ? "" : ",") + std::to_string(r.seed);
  return out.empty() ? "none" : out;
}

Outcome deceptive(const Settings& s) {
  const ExperimentConfig nf = load(s, "deceptive_sacnf");
  const ExperimentConfig sac = load(s, "deceptive_sac");
  const auto nf_runs = run_experiment(nf, s.jobs);
  const auto sac_runs = run_experiment(sac, s.jobs);
  auto reached = [](const RunResult& r) { return r.reached_goal; };
  const auto nf_hits = std::count_if(nf_runs.begin(), nf_runs.end(), reached);
  const auto sac_hits = std::count_if(sac_runs.begin(), sac_runs.end(), reached);
  return {nf_hits >= 4 && sac_hits <= 1,
          fmt("%lld env steps: flow policy reached the goal for %ld/5 seeds (%s; need >= 4), Gaussian for %ld/5 (%s; "
              "need <= 1)",
              static_cast<long long>(nf.trainer.total_env_steps), static_cast<long>(nf_hits),
              list_seeds(nf_runs, reached).c_str(), static_cast<long>(sac_hits),
              list_seeds(sac_runs, reached).c_str())};
}

// ---- 6 and 7: four-goal multimodality and shape analysis ---------------------------

struct FourGoalRuns {
  std::vector<NFPolicy> untrained;
  std::vector<NFPolicy> trained;
  std::vector<std::uint64_t> seeds;
};

FourGoalRuns train_four_goal(const Settings& s) {
  const ExperimentConfig c = load(s, "four_goal_sacnf");
  const Environment env = Environment::from_name(c.env);
  FourGoalRuns out;
  out.untrained.resize(c.seeds.size());
  out.trained.resize(c.seeds.size());
  out.seeds = c.seeds;
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < c.seeds.size(); i = next++) {
      auto learner = make_learner(c.policy, c.trainer, c.seeds[i]);
      out.untrained[i] = learner.policy;
      const TrainingLog log = train(learner, c.trainer, env, c.seeds[i]);
      if (!log.failure.empty()) throw TrainingDiverged(log.failure);
      out.trained[i] = learner.policy;
    }
  };
  std::vector<std::jthread> threads;
  for (int t = 1; t < std::min<int>(s.jobs, static_cast<int>(c.seeds.size())); ++t) threads.emplace_back(worker);
  worker();
  return out;
}

Outcome four_goal(const FourGoalRuns& runs) {
  const Environment env(EnvKind::four_goal);
  int good = 0;
  std::string detail;
  for (std::size_t i = 0; i < runs.trained.size(); ++i) {
    Rng rng = stream(runs.seeds[i], Stream::analysis);
    const auto terminal = stochastic_terminal_positions(runs.trained[i], env, 400, rng);
    double min_mass = 1.0;
    std::string masses;
    for (const auto& g : env.goals()) {
      const double m = mass_within(terminal, g, 1.0);
      min_mass = std::min(min_mass, m);
      masses += fmt("%s%.2f", masses.empty() ? "" : "/", m);
    }
    good += min_mass >= 0.05;
    detail += fmt("%sseed %llu: %s", detail.empty() ? "" : "; ", static_cast<unsigned long long>(runs.seeds[i]),
                  masses.c_str());
  }
  return {good >= 4, fmt("%d/5 seeds with >= 5%% terminal mass at every goal (need >= 4); %s", good, detail.c_str())};
}

std::vector<std::vector<double>> start_states(const Environment& env, int n, Rng& rng) {
  // States of a uniform random walk, shared by every policy scored.
  std::vector<std::vector<double>> states;
  PointState st = env.reset();
  for (int i = 0; i < n; ++i) {
    states.push_back(env.observe(st));
    const std::vector<double> a{uniform(rng, -1, 1), uniform(rng, -1, 1)};
    const StepResult r = env.step(st, a);
    st = r.done() ? env.reset() : r.state;
  }
  return states;
}

Outcome shape_analysis(const FourGoalRuns& runs) {
  const Environment env(EnvKind::four_goal);
  Rng state_rng(707);
  const auto states = start_states(env, 50, state_rng);
  double untrained_max = 0.0, untrained_mean = 0.0, trained_mean = 0.0;
  for (std::size_t i = 0; i < runs.trained.size(); ++i) {
    Rng a(1000 + i), b(2000 + i);
    const double u = shape_kl(runs.untrained[i], states, 250, a).value;
    const double t = shape_kl(runs.trained[i], states, 250, b).value;
    untrained_max = std::max(untrained_max, u);
    untrained_mean += u / static_cast<double>(runs.trained.size());
    trained_mean += t / static_cast<double>(runs.trained.size());
  }

  Rng rng(708);
  auto cloud = [&](int n, double cx) {
    Eigen::MatrixXd x(n, 2);
    for (int i = 0; i < n; ++i) x.row(i) << cx + 0.5 * standard_normal(rng), 0.5 * standard_normal(rng);
    return x;
  };
  Eigen::MatrixXd two(400, 2);
  two << cloud(200, -5.0), cloud(200, 5.0);
  const Eigen::MatrixXd one = cloud(400, 0.0);
  const int k_two = gap_statistic(two, 5, 10, rng).selected_k;
  const int k_one = gap_statistic(one, 5, 10, rng).selected_k;

  const bool pass = untrained_max < 0.05 && trained_mean > untrained_mean && k_two == 2 && k_one == 1;
  return {pass, fmt("untrained shape KL max %.4f (limit 0.05), mean untrained %.4f vs trained %.4f; gap statistic "
                    "selects k=%d on two clusters, k=%d on one",
                    untrained_max, untrained_mean, trained_mean, k_two, k_one)};
}

// ---- 8: sparse threshold task ---------------------------------------------------------

Outcome sparse(const Settings& s) {
  const ExperimentConfig c = load(s, "sparse_sacnf");
  const auto runs = run_experiment(c, s.jobs);
  int good = 0;
  std::string detail;
  for (const auto& r : runs) {
    good += r.final_eval_mean > 0.0;
    detail += fmt("%s%.1f", detail.empty() ? "" : "/", r.final_eval_mean);
  }
  return {good >= 4, fmt("%lld env steps: %d/5 seeds with final mean eval return > 0 (need >= 4); returns %s",
                         static_cast<long long>(c.trainer.total_env_steps), good, detail.c_str())};
}

// ---- 9: parameter bookkeeping -------------------------------------------------------------

Outcome parameter_counts(const Settings& s) {
  struct Declared {
    const char* name;
    std::vector<int> hidden;
    NoiseModel noise;
    std::vector<FlowFamily> flows;
    std::size_t hand_count;
  };
  using enum FlowFamily;
  const std::vector<Declared> declared{
      // mean 2*8+8 + 8*2+2 = 42, log-scale 2, 4 radial layers of 2+2
      {"8 / average / 4 radial", {8}, NoiseModel::average, {radial, radial, radial, radial}, 60},
      // mean 2*16+16 + 16*16+16 + 16*2+2 = 354, log-scale 2
      {"16,16 / average / none", {16, 16}, NoiseModel::average, {}, 356},
      // mean 42, scale net 42, 2 planar layers of 2+2+1
      {"8 / conditional / 2 planar", {8}, NoiseModel::conditional, {planar, planar}, 94},
      // mean 2*64+64 + 64*2+2 = 322, log-scale 2, 3 radial layers of 4
      {"64 / average / 3 radial", {64}, NoiseModel::average, {radial, radial, radial}, 336},
      // mean 2*256+256 + 256*2+2 = 1282, scale net 1282, 5 radial layers of 4
      {"256 / conditional / 5 radial", {256}, NoiseModel::conditional, {radial, radial, radial, radial, radial}, 2584},
  };
  int exact = 0;
  std::string mismatch;
  for (const auto& d : declared) {
    PolicyArchitecture arch;
    arch.hidden = d.hidden;
    arch.noise = d.noise;
    arch.flows = d.flows;
    const std::size_t n = NFPolicy(arch).count_params();
    if (n == d.hand_count) ++exact;
    else mismatch += fmt(" [%s: %zu != %zu]", d.name, n, d.hand_count);
  }
  const auto flow_cfg = load(s, "four_goal_sacnf");
  const auto gauss_cfg = load(s, "four_goal_sac");
  const double nf = static_cast<double>(NFPolicy(flow_cfg.policy).count_params());
  const double gauss = static_cast<double>(NFPolicy(gauss_cfg.policy).count_params());
  return {exact == 5 && nf < gauss, fmt("%d/5 hand counts exact%s; toy policy parameters %g (flows) vs %g (Gaussian), "
                                        "ratio %.3f",
                                        exact, mismatch.c_str(), nf, gauss, nf / gauss)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  Settings settings;
  std::vector<int> only;
  settings.jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  app.add_option("--configs", settings.config_dir, "Directory holding the experiment configs");
  app.add_option("--out", settings.out_dir, "Directory for run artifacts");
  app.add_option("--jobs", settings.jobs, "Seeds trained in parallel")->check(CLI::PositiveNumber);
  app.add_option("--only", only, "Run only these criteria")->check(CLI::Range(1, 9));
  CLI11_PARSE(app, argc, argv);

  const std::set<int> selected = only.empty() ? std::set<int>{1, 2, 3, 4, 5, 6, 7, 8, 9}
                                              : std::set<int>(only.begin(), only.end());
  std::optional<FourGoalRuns> four_goal_runs;
  auto four_goal_cached = [&]() -> const FourGoalRuns& {
    if (!four_goal_runs) four_goal_runs = train_four_goal(settings);
    return *four_goal_runs;
  };

  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"flow log-det vs finite-difference Jacobian", flow_correctness},
      {"loss gradients vs finite differences", gradient_suite},
      {"radial invertibility", invertibility},
      {"zero flows reduce to Gaussian SAC", sac_reduction},
      {"deceptive room", [&] { return deceptive(settings); }},
      {"four-goal multimodality", [&] { return four_goal(four_goal_cached()); }},
      {"shape analysis", [&] { return shape_analysis(four_goal_cached()); }},
      {"sparse threshold task", [&] { return sparse(settings); }},
      {"parameter bookkeeping", [&] { return parameter_counts(settings); }},
  };

  int failures = 0;
  for (int i = 1; i <= 9; ++i) {
    if (!selected.count(i)) continue;
    const auto& [name, run] = criteria[static_cast<std::size_t>(i - 1)];
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failures += !o.pass;
    std::printf("criterion %d %s: %s (%.1fs) %s\n", i, o.pass ? "PASS" : "FAIL", name, secs, o.detail.c_str());
    std::fflush(stdout);
  }
  return failures;
}
