#pragma once

#include <cstdint>
#include <random>

namespace ipgd {

// Deterministic random stream. Every random choice in the library flows
// through this class so that a run replays bit-for-bit for a given seed
// within one build on one platform. Gaussian variates use an explicit
// Box-Muller transform instead of std::normal_distribution, whose output
// sequence is implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform double in [0, 1) with 53 random bits.
  double uniform01() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  // Standard normal variate.
  double gaussian();

  // Child stream for sub-run k of a composite experiment. The constant is a
  // 64-bit odd multiplier (splitmix64 increment) so distinct k never collide
  // for practical seed counts.
  static std::uint64_t derive_seed(std::uint64_t master, std::uint64_t k) {
    return master + 0x9E3779B97F4A7C15ull * (k + 1);
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace ipgd
