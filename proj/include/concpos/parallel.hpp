#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace concpos {

/// Samples per chunk. Fixed so that the reduction tree never depends on the worker count.
inline constexpr std::int64_t kChunkSize = 4096;

/// Worker count from CONCPOS_WORKERS, else the hardware concurrency.
int default_workers();

/// Resolves a requested worker count (<= 0 means default).
int resolve_workers(int requested);

/// Runs f(i) for i in [0, count) on up to `workers` threads. Exceptions are rethrown.
template <class F>
void parallel_for(std::int64_t count, int workers, F&& f) {
  workers = std::max(1, std::min<int>(resolve_workers(workers), static_cast<int>(std::max<std::int64_t>(count, 1))));
  if (workers == 1) {
    for (std::int64_t i = 0; i < count; ++i) f(i);
    return;
  }
  std::atomic<std::int64_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto body = [&] {
    for (;;) {
      const std::int64_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        f(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        next.store(count);
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  for (int w = 1; w < workers; ++w) pool.emplace_back(body);
  body();
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

/// Maps fixed-size chunks of [0, n) to partial results and merges them by a pairwise
/// tree in chunk order. map(begin, end) -> P; merge(P& into, const P& from).
template <class P, class Map, class Merge>
P chunked_reduce(std::int64_t n, int workers, Map&& map, Merge&& merge, std::int64_t chunk = kChunkSize) {
  const std::int64_t chunks = std::max<std::int64_t>(1, (n + chunk - 1) / chunk);
  std::vector<P> parts(static_cast<std::size_t>(chunks));
  parallel_for(chunks, workers, [&](std::int64_t c) {
    const std::int64_t b = c * chunk;
    const std::int64_t e = std::min(n, b + chunk);
    parts[static_cast<std::size_t>(c)] = map(b, std::max(b, e));
  });
  for (std::size_t width = 1; width < parts.size(); width *= 2) {
    for (std::size_t i = 0; i + width < parts.size(); i += 2 * width) merge(parts[i], parts[i + width]);
  }
  return std::move(parts[0]);
}

}  // namespace concpos
