// Seeded random streams. Every stream is derived from (seed, trial, stream id) so a
// result never depends on which thread drew it or in what order.
#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "oneshot/error.hpp"

namespace oneshot::rng {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive(std::uint64_t seed, std::uint64_t trial, std::uint64_t stream) {
  return splitmix64(splitmix64(splitmix64(seed) ^ trial) ^ (stream * 0xD1B54A32D192ED03ULL));
}

// stream ids
inline constexpr std::uint64_t kStreamX = 1, kStreamY = 2, kStreamCoin = 3, kStreamHash = 4, kStreamMisc = 5;

using Engine = std::mt19937_64;

inline Engine stream(std::uint64_t seed, std::uint64_t trial, std::uint64_t id) { return Engine(derive(seed, trial, id)); }

/// Uniform double in [0, 1) from the top 53 bits.
inline double uniform(Engine& e) { return static_cast<double>(e() >> 11) * 0x1.0p-53; }

inline std::size_t uniform_index(Engine& e, std::size_t n) {
  if (n == 0) throw InvalidArgument("uniform_index: empty range");
  return static_cast<std::size_t>(uniform(e) * static_cast<double>(n)) % n;
}

/// Inverse-CDF draw; zero-probability symbols are never returned.
inline std::size_t sample(Engine& e, const std::vector<double>& probs) {
  double total = 0.0;
  for (double p : probs) total += p;
  if (!(total > 0.0)) throw InvalidArgument("sample: distribution has no mass");
  const double u = uniform(e) * total;
  double acc = 0.0;
  std::size_t last = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] <= 0.0) continue;
    acc += probs[i];
    last = i;
    if (u < acc) return i;
  }
  return last;
}

inline std::uint64_t bits(Engine& e) { return e(); }

}  // namespace oneshot::rng
