#include "sacnf/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

namespace sacnf {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

[[noreturn]] void field_error(const std::string& key, const std::string& message) {
  throw ConfigError("config field '" + key + "': " + message);
}

template <class T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const char* first = value.data();
  const char* last = first + value.size();
  const auto [ptr, ec] = std::from_chars(first, last, out);
  if (ec != std::errc() || ptr != last) field_error(key, "cannot parse '" + value + "' as a number");
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true") return true;
  if (value == "false") return false;
  field_error(key, "expected true or false, got '" + value + "'");
}

template <class T>
std::vector<T> parse_list(const std::string& key, const std::string& value) {
  std::vector<T> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_number<T>(key, trim(item)));
  if (out.empty()) field_error(key, "empty list");
  return out;
}

template <class F>
auto rethrow_as_field(const std::string& key, F&& f) {
  try {
    return f();
  } catch (const ConfigError& e) {
    field_error(key, e.what());
  }
}

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig c;
  c.source = text;
  TrainerConfig& t = c.trainer;

  using Setter = std::function<void(const std::string&, const std::string&)>;
  const std::map<std::string, Setter> schema{
      {"env", [&](auto& k, auto& v) { c.env = rethrow_as_field(k, [&] { return Environment::from_name(v).name(); }); }},
      {"flow_family",
       [&](auto& k, auto& v) {
         if (v != "radial" && v != "planar" && v != "none") field_error(k, "expected radial, planar or none");
         c.flow_family = v;
       }},
      {"flow_count", [&](auto& k, auto& v) { c.flow_count = parse_number<int>(k, v); }},
      {"noise_model", [&](auto& k, auto& v) { c.policy.noise = rethrow_as_field(k, [&] { return parse_noise_model(v); }); }},
      {"policy_hidden", [&](auto& k, auto& v) { c.policy.hidden = parse_list<int>(k, v); }},
      {"policy_activation",
       [&](auto& k, auto& v) { c.policy.activation = rethrow_as_field(k, [&] { return parse_activation(v); }); }},
      {"policy_mean_output",
       [&](auto& k, auto& v) { c.policy.mean_output = rethrow_as_field(k, [&] { return parse_activation(v); }); }},
      {"critic_hidden", [&](auto& k, auto& v) { t.critic_hidden = parse_list<int>(k, v); }},
      {"critic_activation",
       [&](auto& k, auto& v) { t.critic_activation = rethrow_as_field(k, [&] { return parse_activation(v); }); }},
      {"alpha_ent", [&](auto& k, auto& v) { t.alpha_ent = parse_number<double>(k, v); }},
      {"gamma", [&](auto& k, auto& v) { t.gamma = parse_number<double>(k, v); }},
      {"tau", [&](auto& k, auto& v) { t.tau = parse_number<double>(k, v); }},
      {"lr_theta", [&](auto& k, auto& v) { t.lr_theta = parse_number<double>(k, v); }},
      {"lr_phi", [&](auto& k, auto& v) { t.lr_phi = parse_number<double>(k, v); }},
      {"lr_v", [&](auto& k, auto& v) { t.lr_v = parse_number<double>(k, v); }},
      {"lr_q", [&](auto& k, auto& v) { t.lr_q = parse_number<double>(k, v); }},
      {"batch_size", [&](auto& k, auto& v) { t.batch_size = parse_number<int>(k, v); }},
      {"buffer_capacity", [&](auto& k, auto& v) { t.buffer_capacity = parse_number<std::size_t>(k, v); }},
      {"total_env_steps", [&](auto& k, auto& v) { t.total_env_steps = parse_number<std::int64_t>(k, v); }},
      {"warmup_steps", [&](auto& k, auto& v) { t.warmup_steps = parse_number<std::int64_t>(k, v); }},
      {"updates_per_step", [&](auto& k, auto& v) { t.updates_per_step = parse_number<int>(k, v); }},
      {"eval_every", [&](auto& k, auto& v) { t.eval_every = parse_number<std::int64_t>(k, v); }},
      {"eval_episodes", [&](auto& k, auto& v) { t.eval_episodes = parse_number<int>(k, v); }},
      {"checkpoint_every", [&](auto& k, auto& v) { t.checkpoint_every = parse_number<std::int64_t>(k, v); }},
      {"twin_q", [&](auto& k, auto& v) { t.twin_q = parse_bool(k, v); }},
      {"divergence_threshold", [&](auto& k, auto& v) { t.divergence_threshold = parse_number<double>(k, v); }},
      {"analysis", [&](auto& k, auto& v) { c.analysis = parse_bool(k, v); }},
      {"seeds", [&](auto& k, auto& v) { c.seeds = parse_list<std::uint64_t>(k, v); }},
      {"output_dir", [&](auto& k, auto& v) {
         if (v.empty()) field_error(k, "empty path");
         c.output_dir = v;
       }}};

  std::set<std::string> seen;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string body = trim(line.substr(0, line.find('#')));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(line_no) + ": expected 'key = value'");
    const std::string key = trim(body.substr(0, eq));
    const std::string value = trim(body.substr(eq + 1));
    const auto it = schema.find(key);
    if (it == schema.end()) field_error(key, "unknown key");
    if (!seen.insert(key).second) field_error(key, "given more than once");
    if (value.empty()) field_error(key, "missing value");
    it->second(key, value);
  }

  if (!seen.count("env")) field_error("env", "required");
  if (!seen.count("total_env_steps")) field_error("total_env_steps", "required");
  if (c.flow_count < 0) field_error("flow_count", "must be >= 0");
  if (c.flow_family == "none" && c.flow_count != 0) field_error("flow_count", "must be 0 when flow_family = none");
  if (t.batch_size < 1) field_error("batch_size", "must be >= 1");
  if (t.buffer_capacity < 1) field_error("buffer_capacity", "must be >= 1");
  if (!(t.gamma >= 0.0 && t.gamma < 1.0)) field_error("gamma", "must lie in [0, 1)");
  if (!(t.tau >= 0.0 && t.tau <= 1.0)) field_error("tau", "must lie in [0, 1]");
  if (!(t.alpha_ent >= 0.0)) field_error("alpha_ent", "must be >= 0");
  for (auto [key, rate] : {std::pair{"lr_theta", t.lr_theta}, {"lr_phi", t.lr_phi}, {"lr_v", t.lr_v}, {"lr_q", t.lr_q}})
    if (!(rate > 0.0)) field_error(key, "must be > 0");
  if (t.total_env_steps < 0) field_error("total_env_steps", "must be >= 0");
  if (t.warmup_steps < 0) field_error("warmup_steps", "must be >= 0");
  if (t.updates_per_step < 1) field_error("updates_per_step", "must be >= 1");
  if (t.eval_every < 0) field_error("eval_every", "must be >= 0");
  if (t.eval_episodes < 1) field_error("eval_episodes", "must be >= 1");
  if (t.checkpoint_every < 0) field_error("checkpoint_every", "must be >= 0");
  if (!(t.divergence_threshold > 0.0)) field_error("divergence_threshold", "must be > 0");
  for (int h : c.policy.hidden)
    if (h < 1) field_error("policy_hidden", "widths must be positive");
  for (int h : t.critic_hidden)
    if (h < 1) field_error("critic_hidden", "widths must be positive");

  const std::set<std::uint64_t> unique_seeds(c.seeds.begin(), c.seeds.end());
  if (unique_seeds.size() != c.seeds.size()) field_error("seeds", "duplicate seed");

  const FlowFamily family = c.flow_family == "planar" ? FlowFamily::planar : FlowFamily::radial;
  c.policy.flows.assign(static_cast<std::size_t>(c.flow_count), family);
  const Environment env = Environment::from_name(c.env);
  c.policy.state_dim = env.observation_dim();
  c.policy.action_dim = env.action_dim();
  t.action_limit = env.spec().action_high;
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read config '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str());
}

}  // namespace sacnf
