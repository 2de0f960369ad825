#include "sacnf/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

namespace sacnf {

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

constexpr char kMagic[8] = {'S', 'A', 'C', 'N', 'F', 'C', 'K', 'P'};

std::uint64_t fnv1a(const char* data, std::size_t n) {
  std::uint64_t h = 1469598103934665603ULL;
  for (std::size_t i = 0; i < n; ++i) h = (h ^ static_cast<unsigned char>(data[i])) * 1099511628211ULL;
  return h;
}

class Writer {
 public:
  template <class T>
  void pod(T v) {
    char bytes[sizeof(T)];
    std::memcpy(bytes, &v, sizeof(T));
    buf_.append(bytes, sizeof(T));
  }
  void str(const std::string& s) {
    pod(static_cast<std::uint32_t>(s.size()));
    buf_ += s;
  }
  void raw(const void* p, std::size_t n) { buf_.append(static_cast<const char*>(p), n); }
  std::string& buffer() { return buf_; }

 private:
  std::string buf_;
};

class Reader {
 public:
  Reader(const std::string& data, std::size_t end) : data_(data), end_(end) {}

  void need(std::size_t n) const {
    if (n > end_ - pos_) throw CheckpointError("checkpoint truncated");
  }
  template <class T>
  T pod() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, data_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string str() {
    const auto n = pod<std::uint32_t>();
    need(n);
    std::string s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  void raw(void* p, std::size_t n) {
    need(n);
    std::memcpy(p, data_.data() + pos_, n);
    pos_ += n;
  }
  bool done() const { return pos_ == end_; }

 private:
  const std::string& data_;
  std::size_t end_;
  std::size_t pos_ = 0;
};

std::string join_activations(const DenseNet& net) {
  std::string out;
  for (std::size_t l = 0; l < net.activations.size(); ++l) out += (l ? "," : "") + to_string(net.activations[l]);
  return out;
}

ParamGroup net_group(const std::string& name, const DenseNet& net) {
  ParamGroup g{name, join_activations(net), {}, net.params};
  for (int s : net.sizes) g.shape.push_back(static_cast<std::uint32_t>(s));
  return g;
}

DenseNet net_from_group(const ParamGroup& g) {
  if (g.shape.size() < 2) throw ShapeError("group '" + g.name + "' is not a network");
  std::vector<int> sizes(g.shape.begin(), g.shape.end());
  std::vector<Activation> acts;
  std::stringstream ss(g.tag);
  std::string item;
  while (std::getline(ss, item, ',')) acts.push_back(parse_activation(item));
  if (acts.size() != sizes.size() - 1) throw ShapeError("group '" + g.name + "': activation count mismatch");
  DenseNet net(sizes, Activation::identity);
  net.activations = acts;
  if (g.values.size() != net.param_count()) throw ShapeError("group '" + g.name + "': parameter count mismatch");
  net.params = g.values;
  return net;
}

std::string flow_name(std::size_t i) { return "policy.flow[" + std::to_string(i) + "]"; }

const ParamGroup& require(const Checkpoint& c, const std::string& name) {
  const ParamGroup* g = c.find(name);
  if (!g) throw ShapeError("checkpoint has no group '" + name + "'");
  return *g;
}

std::size_t count_flow_groups(const Checkpoint& c) {
  std::size_t n = 0;
  while (c.find(flow_name(n))) ++n;
  return n;
}

void check_same_net(const DenseNet& expected, const DenseNet& got, const std::string& name) {
  if (expected.sizes != got.sizes || expected.activations != got.activations)
    throw ShapeError("group '" + name + "' does not match the target network layout");
}

}  // namespace

const ParamGroup* Checkpoint::find(const std::string& name) const {
  for (const auto& g : groups)
    if (g.name == name) return &g;
  return nullptr;
}

void save_checkpoint(const std::string& path, const Checkpoint& checkpoint) {
  Writer w;
  w.raw(kMagic, sizeof kMagic);
  w.pod(kCheckpointVersion);
  w.pod(static_cast<std::uint32_t>(checkpoint.metadata.size()));
  for (const auto& [k, v] : checkpoint.metadata) {
    w.str(k);
    w.str(v);
  }
  w.pod(static_cast<std::uint32_t>(checkpoint.groups.size()));
  for (const auto& g : checkpoint.groups) {
    w.str(g.name);
    w.str(g.tag);
    w.pod(static_cast<std::uint32_t>(g.shape.size()));
    for (auto s : g.shape) w.pod(s);
    w.pod(static_cast<std::uint64_t>(g.values.size()));
    w.raw(g.values.data(), g.values.size() * sizeof(double));
  }
  w.pod(fnv1a(w.buffer().data(), w.buffer().size()));

  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + tmp + "' for writing");
    out.write(w.buffer().data(), static_cast<std::streamsize>(w.buffer().size()));
    if (!out) throw IoError("write failed for '" + tmp + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move checkpoint into '" + path + "': " + ec.message());
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read checkpoint '" + path + "'");
  const std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (data.size() < sizeof kMagic + sizeof(std::uint32_t) + sizeof(std::uint64_t))
    throw CheckpointError("checkpoint truncated");
  if (std::memcmp(data.data(), kMagic, sizeof kMagic) != 0) throw CheckpointError("not a checkpoint file");

  const std::size_t body = data.size() - sizeof(std::uint64_t);
  Reader r(data, body);
  char magic[sizeof kMagic];
  r.raw(magic, sizeof magic);
  const auto version = r.pod<std::uint32_t>();
  if (version != kCheckpointVersion)
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  std::uint64_t stored;
  std::memcpy(&stored, data.data() + body, sizeof stored);
  if (stored != fnv1a(data.data(), body)) throw CheckpointError("checkpoint checksum mismatch (corrupt or truncated)");

  Checkpoint c;
  const auto meta = r.pod<std::uint32_t>();
  for (std::uint32_t i = 0; i < meta; ++i) {
    std::string k = r.str();
    c.metadata[k] = r.str();
  }
  const auto groups = r.pod<std::uint32_t>();
  for (std::uint32_t i = 0; i < groups; ++i) {
    ParamGroup g;
    g.name = r.str();
    g.tag = r.str();
    const auto rank = r.pod<std::uint32_t>();
    r.need(static_cast<std::size_t>(rank) * sizeof(std::uint32_t));
    for (std::uint32_t j = 0; j < rank; ++j) g.shape.push_back(r.pod<std::uint32_t>());
    const auto n = r.pod<std::uint64_t>();
    r.need(n * sizeof(double));
    g.values.resize(n);
    r.raw(g.values.data(), n * sizeof(double));
    c.groups.push_back(std::move(g));
  }
  if (!r.done()) throw CheckpointError("trailing bytes in checkpoint");
  return c;
}

Checkpoint make_checkpoint(const NFPolicy& policy, const CriticPair* critics,
                           std::map<std::string, std::string> metadata) {
  Checkpoint c;
  c.metadata = std::move(metadata);
  c.groups.push_back(net_group("policy.mu", policy.mean_net));
  if (policy.noise_model() == NoiseModel::conditional)
    c.groups.push_back(net_group("policy.scale", policy.scale_net));
  else
    c.groups.push_back({"policy.scale", "log_scale", {static_cast<std::uint32_t>(policy.log_scale.size())}, policy.log_scale});
  for (std::size_t i = 0; i < policy.flows.size(); ++i) {
    const auto begin = policy.flows.params.begin() + static_cast<std::ptrdiff_t>(policy.flows.offset(i));
    c.groups.push_back({flow_name(i), to_string(policy.flows.family(i)),
                        {static_cast<std::uint32_t>(policy.flows.dim())},
                        {begin, begin + static_cast<std::ptrdiff_t>(policy.flows.layer_param_count(i))}});
  }
  if (critics) {
    c.groups.push_back(net_group("critic.q", critics->q));
    c.groups.push_back(net_group("critic.v", critics->v));
    c.groups.push_back(net_group("critic.v_target", critics->v_target));
    if (critics->q2) c.groups.push_back(net_group("critic.q2", *critics->q2));
  }
  return c;
}

NFPolicy policy_from_checkpoint(const Checkpoint& checkpoint) {
  const DenseNet mean = net_from_group(require(checkpoint, "policy.mu"));
  const ParamGroup& scale = require(checkpoint, "policy.scale");
  PolicyArchitecture arch;
  arch.state_dim = mean.input_size();
  arch.action_dim = mean.output_size();
  arch.hidden.assign(mean.sizes.begin() + 1, mean.sizes.end() - 1);
  arch.activation = mean.activations.front();
  arch.mean_output = mean.activations.back();
  arch.noise = scale.tag == "log_scale" ? NoiseModel::average : NoiseModel::conditional;
  for (std::size_t i = 0; i < count_flow_groups(checkpoint); ++i)
    arch.flows.push_back(parse_flow_family(require(checkpoint, flow_name(i)).tag));
  NFPolicy policy(arch);
  restore(checkpoint, policy);
  return policy;
}

void restore(const Checkpoint& checkpoint, NFPolicy& policy, CriticPair* critics) {
  // Stage everything into copies; assign only after every check has passed.
  NFPolicy staged = policy;
  const std::size_t flows = count_flow_groups(checkpoint);
  if (flows != policy.flows.size())
    throw ShapeError("checkpoint has " + std::to_string(flows) + " flow layers, policy expects " +
                     std::to_string(policy.flows.size()));

  const DenseNet mean = net_from_group(require(checkpoint, "policy.mu"));
  check_same_net(policy.mean_net, mean, "policy.mu");
  staged.mean_net = mean;

  const ParamGroup& scale = require(checkpoint, "policy.scale");
  if (policy.noise_model() == NoiseModel::conditional) {
    if (scale.tag == "log_scale") throw ShapeError("checkpoint has an average noise model, policy is conditional");
    const DenseNet net = net_from_group(scale);
    check_same_net(policy.scale_net, net, "policy.scale");
    staged.scale_net = net;
  } else {
    if (scale.tag != "log_scale") throw ShapeError("checkpoint has a conditional noise model, policy is average");
    if (scale.values.size() != policy.log_scale.size()) throw ShapeError("policy.scale: dimension mismatch");
    staged.log_scale = scale.values;
  }

  for (std::size_t i = 0; i < flows; ++i) {
    const ParamGroup& g = require(checkpoint, flow_name(i));
    if (g.tag != to_string(policy.flows.family(i)))
      throw ShapeError(flow_name(i) + ": family " + g.tag + ", policy expects " + to_string(policy.flows.family(i)));
    if (g.shape.size() != 1 || static_cast<int>(g.shape[0]) != policy.flows.dim() ||
        g.values.size() != policy.flows.layer_param_count(i))
      throw ShapeError(flow_name(i) + ": dimension mismatch");
    std::copy(g.values.begin(), g.values.end(),
              staged.flows.params.begin() + static_cast<std::ptrdiff_t>(policy.flows.offset(i)));
  }

  CriticPair staged_critics;
  if (critics) {
    staged_critics = *critics;
    auto load = [&](const std::string& name, DenseNet& target) {
      const DenseNet net = net_from_group(require(checkpoint, name));
      check_same_net(target, net, name);
      target = net;
    };
    load("critic.q", staged_critics.q);
    load("critic.v", staged_critics.v);
    load("critic.v_target", staged_critics.v_target);
    if (staged_critics.q2) load("critic.q2", *staged_critics.q2);
  }

  policy = std::move(staged);
  if (critics) *critics = std::move(staged_critics);
}

}  // namespace sacnf
