#pragma once

#include <cmath>
#include <cstdint>

namespace facov {

/**
 * Counter-based pseudo-random generator (SplitMix64).
 *
 * The state is a plain counter advanced by the golden-ratio constant and the
 * output is a bit-mix of that counter, so draw k of stream s depends only on
 * (seed, s, k).  Streams are derived by hashing the (seed, stream) pair,
 * which makes parallel consumers reproducible at any scheduling order:
 * worker i always constructs Rng(seed, i) and never shares a generator.
 *
 * All integer and uniform draws are bit-identical across platforms.
 */
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0)
      : state_(mix64(seed + kGolden * (stream + 1))) {}

  std::uint64_t next_u64() {
    state_ += kGolden;
    return mix64(state_);
  }

  /// Uniform draw in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform draw in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller; the paired draw is cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    // 1 - uniform() lies in (0, 1], keeping the log argument positive.
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * kPi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

  /// Hash used to derive a child seed for worker `stream` (e.g. one Monte
  /// Carlo replication); documented so external tools can reproduce streams.
  static std::uint64_t derive_stream_seed(std::uint64_t seed, std::uint64_t stream) {
    return mix64(mix64(seed) ^ mix64(kGolden * (stream + 1)));
  }

 private:
  static constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
  static constexpr double kPi = 3.14159265358979323846;

  static std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  std::uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace facov
