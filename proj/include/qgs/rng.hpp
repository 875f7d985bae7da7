#pragma once

#include <cstdint>

namespace qgs {

// SplitMix64 counter generator. Streams are cheap to construct from
// (seed, index), so the simulation gives every pump gate its own stream:
// any worker reproduces the draws of gate g without replaying gates 0..g-1,
// which is what makes histograms independent of the worker count.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : state_(mix(seed + kGamma)) {}

  static RandomStream for_gate(std::uint64_t master_seed, std::uint64_t gate_index) {
    RandomStream s(0);
    s.state_ = mix(mix(master_seed + kGamma) ^ (gate_index * kGamma + 0x94d049bb133111ebULL));
    return s;
  }

  std::uint64_t next_u64() {
    state_ += kGamma;
    return mix(state_);
  }

  // uniform in [0, 1), 53-bit resolution
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // uniform integer in [0, n); n > 0
  std::uint32_t next_index(std::uint32_t n) {
    return static_cast<std::uint32_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

 private:
  static constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;

  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t state_;
};

}  // namespace qgs
