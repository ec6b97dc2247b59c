#pragma once

#include "multilc/types.hpp"

#include <cstdint>
#include <initializer_list>
#include <limits>
#include <random>

namespace multilc {

// 64-bit finalizer used for seeding and for deriving independent substreams.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Deterministic generator with hand-rolled draw transforms. The mt19937_64
// engine is fully specified by the standard, and std:: distributions are not,
// so every transform below is spelled out. The same seed therefore yields the
// same stream on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    std::uint64_t s = seed;
    engine_.seed(splitmix64(s));
  }

  // Derives an independent substream keyed by (seed, parts...). Used to give
  // selection grid cells, simulation groups, and restart loops their own
  // streams so results do not depend on evaluation order or thread count.
  static Rng derive(std::uint64_t seed, std::initializer_list<std::uint64_t> parts) {
    std::uint64_t s = seed;
    std::uint64_t mixed = splitmix64(s);
    for (std::uint64_t p : parts) {
      s ^= p + 0x9E3779B97F4A7C15ULL + (s << 6) + (s >> 2);
      mixed ^= splitmix64(s);
    }
    return Rng(mixed);
  }

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Unbiased uniform integer on [0, n) via rejection sampling.
  std::uint64_t uniform_u64(std::uint64_t n) {
    if (n == 0) throw InternalError("uniform_u64: n must be positive");
    const std::uint64_t max = std::numeric_limits<std::uint64_t>::max();
    const std::uint64_t rem = (max % n + 1) % n;  // 2^64 mod n
    for (;;) {
      const std::uint64_t r = next_u64();
      if (rem == 0 || r < max - rem + 1) return r % n;
    }
  }

  int uniform_int(int n) { return static_cast<int>(uniform_u64(static_cast<std::uint64_t>(n))); }

  bool bernoulli(double p) { return uniform01() < p; }

  // Standard normal via the polar method; caches the spare deviate.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform01() - 1.0;
      v = 2.0 * uniform01() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    has_spare_ = true;
    return u * f;
  }

  // Index draw with probabilities proportional to the (non-negative) weights.
  // Falls back to the last positive-weight index when rounding leaves the
  // cumulative sum short of the draw.
  int categorical(const Vector& weights) {
    const double total = weights.sum();
    if (!(total > 0.0)) throw InternalError("categorical: weights must have positive sum");
    const double u = uniform01() * total;
    double cum = 0.0;
    int last_positive = -1;
    for (Index i = 0; i < weights.size(); ++i) {
      if (weights[i] < 0.0) throw InternalError("categorical: negative weight");
      if (weights[i] > 0.0) last_positive = static_cast<int>(i);
      cum += weights[i];
      if (u < cum) return static_cast<int>(i);
    }
    return last_positive;
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace multilc
