#include "nlsgd/rng.hpp"

#include "doctest.h"

#include <set>
#include <vector>

using namespace nlsgd;

TEST_CASE("same (seed, stream) reproduces the sequence") {
  RngStream a(42, 7);
  RngStream b(42, 7);
  for (int i = 0; i < 1000; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("distinct streams and seeds diverge") {
  std::set<std::uint64_t> firsts;
  for (std::uint64_t s = 0; s < 50; ++s) {
    for (std::uint64_t i = 0; i < 50; ++i) firsts.insert(RngStream(s, i).next_u64());
  }
  CHECK(firsts.size() == 2500);
  CHECK(derive_seed(1, 2) != derive_seed(2, 1));
}

TEST_CASE("uniform_open stays strictly inside (0, 1) and has mean 1/2") {
  RngStream rng(3, 0);
  double sum = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform_open();
    REQUIRE(u > 0.0);
    REQUIRE(u < 1.0);
    sum += u;
  }
  CHECK(sum / n == doctest::Approx(0.5).epsilon(0.005));
}

TEST_CASE("uniform_index covers [0, n) evenly") {
  RngStream rng(9, 1);
  std::vector<int> counts(7, 0);
  const int n = 70000;
  for (int i = 0; i < n; ++i) {
    const auto k = rng.uniform_index(7);
    REQUIRE(k < 7);
    ++counts[k];
  }
  for (int c : counts) CHECK(c == doctest::Approx(10000).epsilon(0.05));
  CHECK(rng.uniform_index(1) == 0);
}

TEST_CASE("stream identity is recorded") {
  RngStream rng(11, 4);
  CHECK(rng.base_seed() == 11);
  CHECK(rng.stream_index() == 4);
}
