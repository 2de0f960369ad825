#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>

namespace sacnf {

// Counter-based generator: output n is mix(key + n * gamma) with the SplitMix64
// finalizer. split() derives an independent key, so every component of a run
// (environment, policy noise, replay sampling, analysis) draws from its own
// stream and adding draws to one never shifts another.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed = 0) : key_(mix(seed ^ 0x6a09e667f3bcc909ULL)) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() { return mix(key_ + (++counter_) * kGamma); }

  Rng split(std::uint64_t stream) const {
    Rng child;
    child.key_ = mix(key_ ^ mix(stream + kGamma));
    return child;
  }

  std::uint64_t counter() const { return counter_; }

 private:
  static constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;

  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
};

// Named sub-streams of a run seed.
enum class Stream : std::uint64_t { init = 1, env = 2, policy_noise = 3, replay = 4, warmup = 5, analysis = 6, eval = 7 };

inline Rng stream(std::uint64_t seed, Stream s) { return Rng(seed).split(static_cast<std::uint64_t>(s)); }

// Uniform in [0, 1) with 53 random bits.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline double uniform(Rng& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

// Box-Muller without a cached second value, so each call consumes exactly two draws.
inline double standard_normal(Rng& rng) {
  const double u1 = 1.0 - uniform01(rng);  // (0, 1]
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

inline std::size_t uniform_index(Rng& rng, std::size_t n) {
  // Lemire's multiply-shift; bias is negligible for the sizes used here.
  return static_cast<std::size_t>((static_cast<unsigned __int128>(rng()) * n) >> 64);
}

}  // namespace sacnf
