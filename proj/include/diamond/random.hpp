// Counter-based random streams. A stream is addressed by (seed, stream, substream)
// and its k-th output is a pure function of that key and k, so any trial can be
// replayed in isolation and results never depend on thread scheduling.
#pragma once

#include <cstdint>
#include <limits>

#include "diamond/dist.hpp"

namespace diamond {

namespace detail {
inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}
}  // namespace detail

class CounterStream {
 public:
  using result_type = std::uint64_t;

  constexpr CounterStream(std::uint64_t seed, std::uint64_t stream, std::uint64_t substream = 0)
      : key_(detail::mix64(detail::mix64(seed ^ detail::kGolden) ^
                           detail::mix64(stream + 0x632BE59BD9B4E019ULL) ^
                           detail::mix64(substream * detail::kGolden + 0x2545F4914F6CDD1DULL))) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  constexpr result_type operator()() { return detail::mix64(key_ + (++counter_) * detail::kGolden); }

  /// Uniform double in [0, 1) with 53 random bits.
  constexpr double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    // Lemire's multiply-shift; the residual bias at n << 2^64 is negligible.
    return static_cast<std::uint64_t>((static_cast<unsigned __int128>((*this)()) * n) >> 64);
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

/// Derives an independent master seed for a named sub-computation.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) {
  return detail::mix64(detail::mix64(seed + detail::kGolden) ^ detail::mix64(tag ^ 0xD1B54A32D192ED03ULL));
}

inline double sample(const ValueDistribution& f, CounterStream& stream) {
  return Sampler(f)(stream.uniform());
}

}  // namespace diamond
