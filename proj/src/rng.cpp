#include "nlsgd/rng.hpp"

namespace nlsgd {

namespace {

std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t base_seed, std::uint64_t stream_index) {
  return splitmix64(splitmix64(base_seed) ^ splitmix64(~stream_index));
}

RngStream::RngStream(std::uint64_t base_seed, std::uint64_t stream_index)
    : base_seed_(base_seed), stream_index_(stream_index) {
  const std::uint64_t s = derive_seed(base_seed, stream_index);
  std::seed_seq seq{static_cast<std::uint32_t>(s), static_cast<std::uint32_t>(s >> 32),
                    static_cast<std::uint32_t>(stream_index),
                    static_cast<std::uint32_t>(stream_index >> 32)};
  engine_.seed(seq);
}

std::uint64_t RngStream::uniform_index(std::uint64_t n) {
  unsigned __int128 m = static_cast<unsigned __int128>(engine_()) * n;
  auto low = static_cast<std::uint64_t>(m);
  if (low < n) {
    const std::uint64_t threshold = (0 - n) % n;
    while (low < threshold) {
      m = static_cast<unsigned __int128>(engine_()) * n;
      low = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<std::uint64_t>(m >> 64);
}

}  // namespace nlsgd
