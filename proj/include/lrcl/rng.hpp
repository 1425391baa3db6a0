#pragma once

#include <cstdint>
#include <span>
#include <utility>

namespace lrcl {

/// Deterministic pseudo-random generator.
///
/// The engine is xoshiro256** (Blackman & Vigna) with its 256-bit state
/// expanded from the 64-bit seed by SplitMix64. All derived draws
/// (uniform reals, integers, normals, shuffles) are implemented here
/// rather than through <random> distributions, whose output is
/// implementation-defined, so a given seed yields the same sequence on
/// every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  std::uint64_t seed() const noexcept { return seed_; }

  std::uint64_t next_u64() noexcept;

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() noexcept;
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). n must be > 0.
  std::uint64_t below(std::uint64_t n) noexcept;

  /// Standard normal via Box-Muller; the second variate is cached.
  double normal() noexcept;

  /// Fisher-Yates shuffle.
  template <typename T>
  void shuffle(std::span<T> items) noexcept {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

  /// Independent generator for a named sub-stream (e.g. per grid cell).
  Rng fork(std::uint64_t stream) const noexcept;

 private:
  std::uint64_t seed_;
  std::uint64_t s_[4];
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// SplitMix64 finalizer, exposed for seed derivation.
std::uint64_t splitmix64(std::uint64_t& state) noexcept;

}  // namespace lrcl
