#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <utility>

namespace knnc {

/// SplitMix64 (Steele, Lea & Flood 2014): a counter-based 64-bit generator.
/// Draw i is mix(seed + (i+1) * 0x9e3779b97f4a7c15), so streams are fully
/// determined by the seed on every platform. Uniform, normal, and bounded
/// integer draws are derived here rather than through <random>
/// distributions, whose algorithms are implementation-defined.
///
/// Satisfies UniformRandomBitGenerator. Single-owner; do not share.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed) noexcept : state_(seed) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept { return next(); }
  std::uint64_t next() noexcept;

  /// Uniform in [0, 1) with 53 bits of resolution.
  double uniform() noexcept;
  /// Uniform in [lo, hi).
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
  /// Standard normal via Box-Muller; the second deviate is cached.
  double normal() noexcept;
  /// Uniform integer in [0, n); unbiased (rejection on the top range). n > 0.
  std::uint64_t below(std::uint64_t n) noexcept;

  template <typename T>
  void shuffle(std::span<T> items) noexcept {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(below(i));
      using std::swap;
      swap(items[i - 1], items[j]);
    }
  }

 private:
  std::uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// The SplitMix64 output finalizer.
std::uint64_t mix64(std::uint64_t x) noexcept;

/// Seed for replicate `index` of a run seeded with `base`: distinct indices
/// give unrelated streams, and the mapping is fixed across builds.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) noexcept;

}  // namespace knnc
