#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace sacnf {

// Bad configuration values, dimension mismatches between components.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite values in the computation graph, network heads or optimizer input.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what, std::int64_t node = -1)
      : std::runtime_error(what), node_(node) {}

  // Tape index of the offending node, or -1 when the error is not tied to one.
  std::int64_t node() const noexcept { return node_; }

 private:
  std::int64_t node_;
};

// Parameter groups that do not fit the architecture they are loaded into.
class ShapeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Sample with (near) zero variance handed to a shape statistic.
class DegenerateSampleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace sacnf
