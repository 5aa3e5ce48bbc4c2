#pragma once

// Seeded, platform-independent random streams. std::mt19937_64 and
// std::seed_seq are fully specified by the standard; the standard
// distributions are not, so the variate conversions live here.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace partacc {

/// A base seed plus a stream index. Equal pairs give equal draws everywhere.
struct RngSeed {
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;

  /// Child stream identified by `tag`, independent of the parent stream.
  RngSeed derive(std::uint64_t tag) const {
    return {seed, splitmix64(stream ^ splitmix64(tag + 0x5851f42d4c957f2dULL))};
  }

  static constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  }

  friend bool operator==(const RngSeed&, const RngSeed&) = default;
};

using Engine = std::mt19937_64;

inline Engine make_engine(RngSeed s) {
  std::seed_seq seq{static_cast<std::uint32_t>(s.seed), static_cast<std::uint32_t>(s.seed >> 32),
                    static_cast<std::uint32_t>(s.stream), static_cast<std::uint32_t>(s.stream >> 32)};
  return Engine(seq);
}

/// Uniform double on [0, 1) with 53 random bits.
inline double uniform01(Engine& eng) { return static_cast<double>(eng() >> 11) * 0x1.0p-53; }

inline double uniform(Engine& eng, double lo, double hi) { return lo + (hi - lo) * uniform01(eng); }

/// Uniform integer on [0, n), unbiased (Lemire's multiply-and-reject).
inline std::uint64_t uniform_index(Engine& eng, std::uint64_t n) {
  unsigned __int128 m = static_cast<unsigned __int128>(eng()) * n;
  auto low = static_cast<std::uint64_t>(m);
  if (low < n) {
    const std::uint64_t threshold = (0 - n) % n;
    while (low < threshold) {
      m = static_cast<unsigned __int128>(eng()) * n;
      low = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<std::uint64_t>(m >> 64);
}

/// Standard normal variate (Marsaglia polar method, one value per call).
inline double standard_normal(Engine& eng) {
  for (;;) {
    const double u = 2.0 * uniform01(eng) - 1.0;
    const double v = 2.0 * uniform01(eng) - 1.0;
    const double s = u * u + v * v;
    if (s > 0.0 && s < 1.0) return u * std::sqrt(-2.0 * std::log(s) / s);
  }
}

}  // namespace partacc
