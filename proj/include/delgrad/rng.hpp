#pragma once
#include <cstdint>
#include <cmath>
#include <numbers>

// Counter-based random streams. Every draw is a pure function of
// (seed, stream tags..., counter), so independent consumers (samples of a
// batch, cells of a sweep) can draw concurrently and still produce the same
// numbers as a serial run. No generator state is ever shared or checkpointed.

namespace delgrad {

inline uint64_t splitmix64(uint64_t x)
{
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Stream tags keep unrelated consumers of the same seed decorrelated.
enum class Stream : uint64_t {
  dataset       = 0x11,
  weight_init   = 0x22,
  delay_init    = 0x33,
  shuffle       = 0x44,
  fixed_pattern = 0x55,
  trial_noise   = 0x66,
  delay_jitter  = 0x77,
  gradcheck     = 0x88,
};

struct Rng {
  uint64_t key = 0;
  uint64_t counter = 0;
  double spare = 0.0;
  bool has_spare = false;

  explicit Rng(uint64_t seed) : key(splitmix64(seed)) {}

  Rng(uint64_t seed, Stream stream, uint64_t a = 0, uint64_t b = 0, uint64_t c = 0)
  {
    key = splitmix64(seed);
    key = splitmix64(key ^ static_cast<uint64_t>(stream));
    key = splitmix64(key ^ a);
    key = splitmix64(key ^ b);
    key = splitmix64(key ^ c);
  }

  uint64_t next_u64() { return splitmix64(key ^ splitmix64(counter++)); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n). n must be > 0.
  uint64_t uniform_int(uint64_t n)
  {
    return static_cast<uint64_t>((static_cast<__uint128_t>(next_u64()) * n) >> 64);
  }

  // Box-Muller; explicit formula keeps draws identical across standard
  // libraries, unlike std::normal_distribution.
  double normal()
  {
    if (has_spare) {
      has_spare = false;
      return spare;
    }
    const double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;  // (0, 1]
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    spare = r * std::sin(a);
    has_spare = true;
    return r * std::cos(a);
  }

  double normal(double mean, double std) { return mean + std * normal(); }
};

}  // namespace delgrad
