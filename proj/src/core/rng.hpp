#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>
#include <vector>

namespace hypcbc {

// Deterministic SplitMix64 generator, splittable by named stream.
//
// Every random draw in the project goes through this generator so that
// trajectories reproduce bit-for-bit across runs and platforms. A stream is
// identified by (seed, name, salt); e.g. the epoch-3 batch shuffle uses
// stream("shuffle", 3). The full contract is documented in docs/formats.md.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(mix(seed ^ 0x9E3779B97F4A7C15ull)) {}

  Rng(uint64_t seed, std::string_view stream, uint64_t salt = 0)
      : state_(mix(mix(seed ^ 0x9E3779B97F4A7C15ull) ^ fnv1a(stream) ^
                   mix(salt + 0x2545F4914F6CDD1Dull))) {}

  uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ull;
    uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1) with 53 random mantissa bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller; the spare value is cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  // Unbiased integer in [0, n) (Lemire multiply-shift with rejection).
  uint64_t bounded(uint64_t n) {
    if (n == 0) return 0;
    uint64_t x = next_u64();
    __uint128_t m = static_cast<__uint128_t>(x) * n;
    uint64_t lo = static_cast<uint64_t>(m);
    if (lo < n) {
      const uint64_t t = (0ull - n) % n;  // 2^64 mod n
      while (lo < t) {
        x = next_u64();
        m = static_cast<__uint128_t>(x) * n;
        lo = static_cast<uint64_t>(m);
      }
    }
    return static_cast<uint64_t>(m >> 64);
  }

  // Fisher-Yates; the draw order is part of the determinism contract.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      const size_t j = static_cast<size_t>(bounded(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  static uint64_t mix(uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  static uint64_t fnv1a(std::string_view s) {
    uint64_t h = 0xCBF29CE484222325ull;
    for (const char ch : s) {
      h ^= static_cast<unsigned char>(ch);
      h *= 0x100000001B3ull;
    }
    return h;
  }

  uint64_t state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace hypcbc
