// Deterministic parallel reduction over fixed-size chunks of trials.
#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <thread>
#include <vector>

namespace diamond {

/// Monte Carlo estimate with its standard error.
struct Estimate {
  double value = 0.0;
  double se = 0.0;
};

/// Sample moments that merge exactly in a fixed order.
struct Moments {
  std::int64_t count = 0;
  double sum = 0.0;
  double sum_sq = 0.0;

  void add(double x) {
    ++count;
    sum += x;
    sum_sq += x * x;
  }
  void merge(const Moments& o) {
    count += o.count;
    sum += o.sum;
    sum_sq += o.sum_sq;
  }
  double mean() const { return count > 0 ? sum / static_cast<double>(count) : 0.0; }
  double variance() const {
    if (count < 2) return 0.0;
    const double m = mean();
    const double v = (sum_sq - static_cast<double>(count) * m * m) / static_cast<double>(count - 1);
    return std::max(v, 0.0);
  }
  double standard_error() const {
    return count > 0 ? std::sqrt(variance() / static_cast<double>(count)) : 0.0;
  }
  Estimate estimate() const { return {mean(), standard_error()}; }
};

inline constexpr std::int64_t kChunkSize = 2048;

inline unsigned resolve_threads(unsigned requested) {
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? hw : 1;
}

/// Runs `body(begin, end)` on chunks of [0, n) and folds the per-chunk results
/// left to right with `merge`. The chunking ignores the thread count, so the
/// result is bit-identical for any level of parallelism.
template <class Acc, class Body, class Merge>
Acc chunked_reduce(std::int64_t n, unsigned threads, Acc init, Body body, Merge merge) {
  const std::int64_t chunks = (n + kChunkSize - 1) / kChunkSize;
  std::vector<Acc> partial(static_cast<std::size_t>(chunks), init);
  std::atomic<std::int64_t> next{0};
  auto worker = [&] {
    for (std::int64_t c = next++; c < chunks; c = next++) {
      const std::int64_t begin = c * kChunkSize;
      const std::int64_t end = std::min(n, begin + kChunkSize);
      partial[static_cast<std::size_t>(c)] = body(begin, end);
    }
  };
  const unsigned t = std::min<std::int64_t>(resolve_threads(threads), std::max<std::int64_t>(chunks, 1));
  if (t <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(t);
    for (unsigned i = 0; i < t; ++i) pool.emplace_back(worker);
  }
  Acc total = std::move(init);
  for (auto& p : partial) merge(total, p);
  return total;
}

}  // namespace diamond
