#pragma once

#include <cmath>
#include <cstdint>

// Counter-based random streams. Every draw is a pure function of
// (key, counter), so independent streams keyed by (seed, indices) can be
// evaluated in any order, which is what makes pairwise edge generation
// order-independent and parallel-safe.

namespace orderlab::rng {

inline constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ull;

inline constexpr std::uint64_t mix64(std::uint64_t z) {
  z += kGolden;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

inline constexpr std::uint64_t combine(std::uint64_t h, std::uint64_t v) {
  return mix64(h ^ (v + kGolden + (h << 6) + (h >> 2)));
}

class Stream {
 public:
  explicit Stream(std::uint64_t key) : key_(mix64(key)) {}

  static Stream keyed(std::uint64_t seed, std::uint64_t a) {
    return Stream(combine(mix64(seed), a));
  }
  static Stream keyed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
    return Stream(combine(combine(mix64(seed), a), b));
  }
  static Stream keyed(std::uint64_t seed, std::uint64_t a, std::uint64_t b,
                      std::uint64_t c) {
    return Stream(combine(combine(combine(mix64(seed), a), b), c));
  }

  std::uint64_t next_u64() { return mix64(key_ + (++ctr_) * kGolden); }

  // Uniform in [0,1), 53 random bits.
  double uniform01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  bool bernoulli(double p) { return uniform01() < p; }

  // Standard normal via Box-Muller; the spare value is cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 1.0 - uniform01();  // (0,1]
    double u2 = uniform01();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  // Unbiased integer in [0, n) by rejection.
  std::uint64_t below(std::uint64_t n) {
    if (n <= 1) return 0;
    std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t x;
    do {
      x = next_u64();
    } while (x >= limit);
    return x % n;
  }

 private:
  std::uint64_t key_;
  std::uint64_t ctr_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace orderlab::rng
