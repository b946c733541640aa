#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "aiscast/rng.hpp"

using namespace aiscast;

TEST_CASE("rng: identical seeds give identical streams", "[rng]") {
  Rng a(12345), b(12345);
  for (int i = 0; i < 1000; ++i) REQUIRE(a.next_u64() == b.next_u64());
}

TEST_CASE("rng: different seeds diverge", "[rng]") {
  Rng a(1), b(2);
  int same = 0;
  for (int i = 0; i < 100; ++i) same += a.next_u64() == b.next_u64();
  REQUIRE(same == 0);
}

TEST_CASE("rng: uniform stays in [0,1) with sane mean", "[rng]") {
  Rng r(7);
  double sum = 0.0;
  for (int i = 0; i < 20000; ++i) {
    const double u = r.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    sum += u;
  }
  REQUIRE(std::abs(sum / 20000 - 0.5) < 0.01);
}

TEST_CASE("rng: normal has expected moments", "[rng]") {
  Rng r(99);
  const int n = 40000;
  double s1 = 0.0, s2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = r.normal(2.0, 3.0);
    s1 += x;
    s2 += x * x;
  }
  const double mean = s1 / n;
  const double var = s2 / n - mean * mean;
  REQUIRE(std::abs(mean - 2.0) < 0.05);
  REQUIRE(std::abs(std::sqrt(var) - 3.0) < 0.05);
}

TEST_CASE("rng: next_below bounded and roughly uniform", "[rng]") {
  Rng r(5);
  std::vector<int> counts(10, 0);
  for (int i = 0; i < 50000; ++i) {
    const auto v = r.next_below(10);
    REQUIRE(v < 10);
    ++counts[v];
  }
  for (int c : counts) REQUIRE(std::abs(c - 5000) < 400);
  REQUIRE_THROWS_AS(r.next_below(0), std::invalid_argument);
}

TEST_CASE("rng: shuffle is a deterministic permutation", "[rng]") {
  std::vector<int> v(50);
  std::iota(v.begin(), v.end(), 0);
  auto w = v;
  Rng r1(42), r2(42);
  r1.shuffle(v);
  r2.shuffle(w);
  REQUIRE(v == w);
  auto sorted = v;
  std::sort(sorted.begin(), sorted.end());
  std::vector<int> expect(50);
  std::iota(expect.begin(), expect.end(), 0);
  REQUIRE(sorted == expect);
  REQUIRE(v != expect);  // 50 elements: identity shuffle is implausible
}

TEST_CASE("rng: categorical follows the weights", "[rng]") {
  Rng r(11);
  std::vector<double> w{1.0, 3.0};
  int ones = 0;
  for (int i = 0; i < 20000; ++i) ones += r.categorical(w) == 1;
  REQUIRE(std::abs(ones / 20000.0 - 0.75) < 0.02);
  REQUIRE_THROWS_AS(r.categorical({0.0, 0.0}), std::invalid_argument);
  REQUIRE_THROWS_AS(r.categorical({-1.0, 2.0}), std::invalid_argument);
}

TEST_CASE("rng: mix_seed derives distinct substreams", "[rng]") {
  REQUIRE(mix_seed(1, 0) != mix_seed(1, 1));
  REQUIRE(mix_seed(1, 0) != mix_seed(2, 0));
  REQUIRE(mix_seed(1, 5) == mix_seed(1, 5));
  Rng a(mix_seed(9, 0)), b(mix_seed(9, 1));
  int same = 0;
  for (int i = 0; i < 100; ++i) same += a.next_u64() == b.next_u64();
  REQUIRE(same == 0);
}
