#pragma once

#include <cmath>
#include <random>
#include <string_view>
#include <vector>

#include "pop/common.hpp"

namespace pop {

inline u64 splitmix64(u64 x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Deterministic stream splitting: the root seed plus a purpose tag plus up to
// two indices (iteration, episode, ...) give an independent stream. Results
// must not depend on evaluation order or worker layout, so every consumer
// derives its own stream instead of sharing one engine.
inline u64 derive_seed(u64 root, std::string_view tag, u64 a = 0, u64 b = 0) {
  u64 h = fnv1a64(tag, splitmix64(root));
  h = splitmix64(h ^ splitmix64(a + 0x1d8e4e27c47d124full));
  h = splitmix64(h ^ splitmix64(b + 0x9e6c63d0176c60ddull));
  return h;
}

// mt19937_64 with hand-rolled uniform/normal so draws are identical across
// standard library implementations (std::normal_distribution is not pinned).
class Rng {
 public:
  explicit Rng(u64 seed) : eng_(seed) {}

  u64 bits() { return eng_(); }

  // [0, 1), 53-bit resolution
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  double uniform(double a, double b) { return a + (b - a) * uniform(); }

  double normal() {
    if (have_) {
      have_ = false;
      return cached_;
    }
    double u1;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double th = 6.283185307179586476925286766559 * u2;
    cached_ = r * std::sin(th);
    have_ = true;
    return r * std::cos(th);
  }

  double normal(double mu, double sd) { return mu + sd * normal(); }

  // [0, n), unbiased
  i64 randint(i64 n) {
    POP_CHECK(n > 0, "randint needs n > 0");
    u64 un = static_cast<u64>(n);
    u64 lim = UINT64_MAX - UINT64_MAX % un;
    u64 x;
    do {
      x = eng_();
    } while (x >= lim);
    return static_cast<i64>(x % un);
  }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (i64 i = static_cast<i64>(v.size()) - 1; i > 0; i--)
      std::swap(v[static_cast<size_t>(i)], v[static_cast<size_t>(randint(i + 1))]);
  }

 private:
  std::mt19937_64 eng_;
  bool have_ = false;
  double cached_ = 0.0;
};

}  // namespace pop
