#pragma once

// Seed splitting and portable bounded draws. std::uniform_int_distribution is
// implementation-defined, so draws are done by hand on top of mt19937_64 to
// keep traces identical across standard libraries.
//
// Splitting rule: substream seed = splitmix64(master ^ fnv1a64(label)), where
// label names the consumer (e.g. "mac/router/ch6"). Streams are keyed by name,
// not by position, so adding a station leaves every other stream untouched.

#include <cstdint>
#include <limits>
#include <random>
#include <string_view>

namespace powifi {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

inline constexpr std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ull;
  }
  return h;
}

inline constexpr std::uint64_t derive_seed(std::uint64_t master, std::string_view label) {
  return splitmix64(master ^ fnv1a64(label));
}

class Rng {
public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  Rng(std::uint64_t master, std::string_view label) : engine_(derive_seed(master, label)) {}

  // Uniform integer in [0, hi], rejection-sampled.
  std::uint64_t uniform_int(std::uint64_t hi) {
    if (hi == std::numeric_limits<std::uint64_t>::max()) return engine_();
    const std::uint64_t span = hi + 1;
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % span;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % span;
  }

  // Uniform double in [0, 1).
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

private:
  std::mt19937_64 engine_;
};

}  // namespace powifi
