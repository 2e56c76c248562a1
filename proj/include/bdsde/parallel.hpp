#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace bdsde {

/// Paths are processed in fixed chunks so every reduction sees the same
/// partial sums in the same order whatever the thread count.
inline constexpr std::size_t kChunk = 4096;

inline std::size_t chunk_count(std::size_t n) { return (n + kChunk - 1) / kChunk; }

/// Calls fn(chunk, begin, end) for every chunk; chunks are distributed
/// round-robin over `threads` workers. The first exception is rethrown.
template <class Fn>
void parallel_chunks(std::size_t n, int threads, Fn&& fn) {
  const std::size_t chunks = chunk_count(n);
  const std::size_t workers = std::min<std::size_t>(std::max(1, threads), chunks);
  if (workers <= 1) {
    for (std::size_t c = 0; c < chunks; ++c) fn(c, c * kChunk, std::min(n, (c + 1) * kChunk));
    return;
  }
  std::exception_ptr error;
  std::mutex mu;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t c = w; c < chunks; c += workers) fn(c, c * kChunk, std::min(n, (c + 1) * kChunk));
      } catch (...) {
        std::lock_guard lock(mu);
        if (!error) error = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

/// Sum of per-chunk partials in chunk order.
template <class T, class Fn>
T chunked_sum(std::size_t n, int threads, T zero, Fn&& partial) {
  std::vector<T> parts(chunk_count(n), zero);
  parallel_chunks(n, threads, [&](std::size_t c, std::size_t b, std::size_t e) { parts[c] = partial(b, e); });
  T total = zero;
  for (const T& p : parts) total += p;
  return total;
}

}  // namespace bdsde
