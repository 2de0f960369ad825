#include "sacnf/tape.hpp"

#include <string>

namespace sacnf {

void Tape::backward(Var output) {
  if (output.tape != this || output.index >= values_.size())
    throw ConfigError("backward: output node does not belong to this tape");
  if (!std::isfinite(values_[output.index]))
    throw NumericError("backward: non-finite output at node " + std::to_string(output.index),
                       output.index);

  adjoints_.assign(values_.size(), 0.0);
  adjoints_[output.index] = 1.0;
  for (std::int64_t i = output.index; i >= 0; --i) {
    const double adj = adjoints_[i];
    if (adj == 0.0) continue;
    if (!std::isfinite(adj) || !std::isfinite(values_[i]))
      throw NumericError("backward: non-finite value at node " + std::to_string(i), i);
    for (std::uint32_t e = offsets_[i]; e < offsets_[i + 1]; ++e) adjoints_[parents_[e]] += adj * partials_[e];
  }
}

std::vector<double> Tape::gradient(std::span<const Var> leaves) const {
  std::vector<double> g(leaves.size(), 0.0);
  if (adjoints_.empty()) return g;
  for (std::size_t i = 0; i < leaves.size(); ++i) {
    const auto idx = leaves[i].index;
    g[i] = idx < adjoints_.size() ? adjoints_[idx] : 0.0;
  }
  return g;
}

}  // namespace sacnf
