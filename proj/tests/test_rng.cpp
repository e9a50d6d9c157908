#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <set>

#include "pop/rng.hpp"

using namespace pop;

TEST_CASE("same seed gives same stream, different seeds differ") {
  Rng a(42), b(42), c(43);
  bool all_eq = true, any_diff = false;
  for (int i = 0; i < 1000; i++) {
    double x = a.uniform(), y = b.uniform(), z = c.uniform();
    all_eq = all_eq && (x == y);
    any_diff = any_diff || (x != z);
  }
  REQUIRE(all_eq);
  REQUIRE(any_diff);
}

TEST_CASE("derive_seed separates purposes and indices") {
  std::set<u64> seen;
  for (u64 i = 0; i < 100; i++) {
    seen.insert(derive_seed(7, "prior", i));
    seen.insert(derive_seed(7, "rollout", i));
    seen.insert(derive_seed(7, "prior", i, 1));
  }
  REQUIRE(seen.size() == 300);
  REQUIRE(derive_seed(7, "prior", 3, 4) == derive_seed(7, "prior", 3, 4));
  REQUIRE(derive_seed(7, "prior", 3, 4) != derive_seed(8, "prior", 3, 4));
}

TEST_CASE("uniform moments and support") {
  Rng r(123);
  const int n = 200000;
  double s = 0, s2 = 0;
  for (int i = 0; i < n; i++) {
    double x = r.uniform();
    REQUIRE(x >= 0.0);
    REQUIRE(x < 1.0);
    s += x;
    s2 += x * x;
  }
  double mean = s / n, var = s2 / n - mean * mean;
  REQUIRE(std::abs(mean - 0.5) < 0.005);
  REQUIRE(std::abs(var - 1.0 / 12) < 0.005);
}

TEST_CASE("uniform(a,b) stays in range for random ranges") {
  Rng meta(99), r(100);
  for (int trial = 0; trial < 50; trial++) {
    double a = meta.uniform(-100, 100);
    double b = a + meta.uniform(1e-6, 50);
    for (int i = 0; i < 200; i++) {
      double x = r.uniform(a, b);
      REQUIRE(x >= a);
      REQUIRE(x < b);
    }
  }
}

TEST_CASE("normal moments") {
  Rng r(7);
  const int n = 200000;
  double s = 0, s2 = 0, s3 = 0, s4 = 0;
  for (int i = 0; i < n; i++) {
    double x = r.normal();
    s += x;
    s2 += x * x;
    s3 += x * x * x;
    s4 += x * x * x * x;
  }
  double mean = s / n;
  double var = s2 / n - mean * mean;
  REQUIRE(std::abs(mean) < 0.01);
  REQUIRE(std::abs(var - 1.0) < 0.02);
  REQUIRE(std::abs(s3 / n) < 0.05);        // skew
  REQUIRE(std::abs(s4 / n - 3.0) < 0.15);  // kurtosis
}

TEST_CASE("normal(mu, sd) scales correctly") {
  Rng r(8);
  const int n = 100000;
  double s = 0, s2 = 0;
  for (int i = 0; i < n; i++) {
    double x = r.normal(5.0, 3.0);
    s += x;
    s2 += x * x;
  }
  double mean = s / n, var = s2 / n - mean * mean;
  REQUIRE(std::abs(mean - 5.0) < 0.05);
  REQUIRE(std::abs(var - 9.0) < 0.2);
}

TEST_CASE("randint is unbiased over [0, n)") {
  Rng r(11);
  const i64 n = 7;
  std::vector<int> counts(n, 0);
  const int draws = 70000;
  for (int i = 0; i < draws; i++) counts[static_cast<size_t>(r.randint(n))]++;
  for (i64 k = 0; k < n; k++) {
    REQUIRE(counts[static_cast<size_t>(k)] > draws / static_cast<int>(n) - 500);
    REQUIRE(counts[static_cast<size_t>(k)] < draws / static_cast<int>(n) + 500);
  }
}

TEST_CASE("shuffle is a permutation and depends on seed") {
  std::vector<int> v(50);
  for (int i = 0; i < 50; i++) v[static_cast<size_t>(i)] = i;
  auto w = v;
  Rng r(5);
  r.shuffle(w);
  auto sorted = w;
  std::sort(sorted.begin(), sorted.end());
  REQUIRE(sorted == v);
  REQUIRE(w != v);
  auto w2 = v;
  Rng r2(5);
  r2.shuffle(w2);
  REQUIRE(w == w2);
}

TEST_CASE("fnv1a64 matches published test vectors") {
  REQUIRE(fnv1a64("") == 0xcbf29ce484222325ull);
  REQUIRE(fnv1a64("a") == 0xaf63dc4c8601ec8cull);
  REQUIRE(fnv1a64("foobar") == 0x85944171f73967e8ull);
}
