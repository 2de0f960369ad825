#pragma once

// Binary checkpoints.
//
//   "SACNFCKP" | u32 version | u32 metadata count | (str key, str value)*
//   | u32 group count | group* | u64 FNV-1a of everything before it
//
//   group: str name | str tag | u32 rank | u32 shape[rank] | u64 n | f64 values[n]
//   str:   u32 length | bytes
//
// Integers and doubles are stored little-endian. Networks use tag = their
// activations ("tanh,identity") and shape = layer widths; flow layers use
// tag = family and shape = {d}; a free log-scale vector uses tag "log_scale".

#include <map>
#include <string>
#include <vector>

#include "sacnf/policy.hpp"
#include "sacnf/sac.hpp"

namespace sacnf {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct ParamGroup {
  std::string name;
  std::string tag;
  std::vector<std::uint32_t> shape;
  std::vector<double> values;
};

struct Checkpoint {
  std::map<std::string, std::string> metadata;
  std::vector<ParamGroup> groups;

  const ParamGroup* find(const std::string& name) const;
};

// Writes to a temporary file and renames it into place. Throws IoError.
void save_checkpoint(const std::string& path, const Checkpoint& checkpoint);

// Throws IoError when unreadable, CheckpointError on a bad magic, version,
// checksum or a truncated file.
Checkpoint load_checkpoint(const std::string& path);

// Groups "policy.mu", "policy.scale", "policy.flow[i]" and, when given,
// "critic.q", "critic.v", "critic.v_target", "critic.q2".
Checkpoint make_checkpoint(const NFPolicy& policy, const CriticPair* critics = nullptr,
                           std::map<std::string, std::string> metadata = {});

// Rebuilds a policy from the groups alone.
NFPolicy policy_from_checkpoint(const Checkpoint& checkpoint);

// Copies parameters into an existing policy (and critics). Every group is
// validated before anything is written; a flow-count or layer mismatch throws
// ShapeError and leaves the targets untouched.
void restore(const Checkpoint& checkpoint, NFPolicy& policy, CriticPair* critics = nullptr);

}  // namespace sacnf
