#pragma once

#include <cstdint>

#include "deridge/stats.hpp"

namespace deridge {

// SplitMix64: a counter advanced by the golden-ratio increment, pushed
// through a 64-bit avalanche finalizer (Steele, Lea & Flood, 2014).  The
// output is a pure function of (initial state, call index), so a stream
// can be handed to any worker thread and replayed exactly.
//
// Substreams: Rng(seed, stream) hashes the pair into the initial state.
// Replication j of a simulation study always draws from stream j, which
// makes every study reproducible independent of scheduling order.
//
// Normal deviates use the inverse-CDF map (AS 241) on a 53-bit uniform.
// Both choices are part of the file-format contract: seeds written into
// manifests must regenerate identical data in any future build.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(mix(seed ^ kSalt)) {}

  Rng(std::uint64_t seed, std::uint64_t stream)
      : state_(mix(mix(seed ^ kSalt) + kGolden * (stream + 1))) {}

  std::uint64_t next_u64() {
    state_ += kGolden;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform on the open interval (0, 1); never returns an endpoint, so the
  // inverse CDF below is always finite.
  double uniform01() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  double normal() { return normal_quantile(uniform01()); }

  double normal(double mean, double sd) { return mean + sd * normal(); }

 private:
  static constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;
  static constexpr std::uint64_t kSalt = 0x8f5e3c6d2a197b41ULL;

  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t state_;
};

}  // namespace deridge
