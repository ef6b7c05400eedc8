#pragma once

#include <cstdint>
#include <random>

namespace nlsgd {

/// Mixes (base_seed, stream_index) into a 64-bit seed (SplitMix64 finalizer).
std::uint64_t derive_seed(std::uint64_t base_seed, std::uint64_t stream_index);

/// Per-path random stream. Path i of a Monte-Carlo sweep owns
/// RngStream(base_seed, i); streams never share state, so results do not
/// depend on which worker runs which path.
class RngStream {
 public:
  RngStream(std::uint64_t base_seed, std::uint64_t stream_index);

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on the open interval (0, 1), on the 2^-53 lattice shifted by
  /// half a step. Platform-independent, unlike std::uniform_real_distribution.
  double uniform_open() {
    return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Uniform integer in [0, n), n > 0 (Lemire's nearly-divisionless method).
  std::uint64_t uniform_index(std::uint64_t n);

  std::uint64_t base_seed() const { return base_seed_; }
  std::uint64_t stream_index() const { return stream_index_; }

 private:
  std::uint64_t base_seed_;
  std::uint64_t stream_index_;
  std::mt19937_64 engine_;
};

}  // namespace nlsgd
