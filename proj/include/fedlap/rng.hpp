#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace fedlap {

// Deterministic, platform-independent random stream. std::mt19937_64 is
// portable, but the standard distributions are not, so draws go through
// hand-rolled transforms instead.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed ? seed : 0x9e3779b97f4a7c15ull) {}

  std::uint64_t next_u64() {
    // splitmix64
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // uniform in [0, 1)
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // uniform integer in [0, bound), bound > 0
  std::uint64_t uniform_below(std::uint64_t bound) {
    // rejection sampling to avoid modulo bias
    const std::uint64_t threshold = (0ull - bound) % bound;
    for (;;) {
      std::uint64_t x = next_u64();
      if (x >= threshold) return x % bound;
    }
  }

  bool bernoulli(double p) { return uniform01() < p; }

  // standard normal via Box-Muller; one value per call, cache discarded
  double normal() {
    double u1 = uniform01(), u2 = uniform01();
    while (u1 <= 1e-300) u1 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925 * u2);
  }

 private:
  std::uint64_t state_;
};

// FNV-1a over a label, used to fan a master seed out to independent
// per-module streams that can be rerun in isolation.
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view label) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (char c : label) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ull;
  }
  Rng mix(master ^ h);
  return mix.next_u64();
}

inline std::uint64_t derive_seed(std::uint64_t master, std::string_view label, std::uint64_t index) {
  std::uint64_t base = derive_seed(master, label);
  Rng mix(base ^ (0x9e3779b97f4a7c15ull * (index + 1)));
  return mix.next_u64();
}

}  // namespace fedlap
