#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace emlab {

// Paths per work item. Fixed so that the reduction tree does not depend on
// the worker count.
inline constexpr std::uint64_t kPathsPerChunk = 64;

/// Runs `work(path_index, accumulator)` for every path in [0, path_count)
/// and merges the per-chunk accumulators with a fixed pairwise tree.
/// The result is bit-identical for any `workers` >= 1.
template <class Acc, class Work, class Merge>
Acc ReducePaths(std::uint64_t path_count, int workers, const Acc& identity, Work&& work,
                Merge&& merge) {
  const std::uint64_t chunks = (path_count + kPathsPerChunk - 1) / kPathsPerChunk;
  if (chunks == 0) return identity;
  std::vector<Acc> partial(chunks, identity);
  std::atomic<std::uint64_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;

  auto worker = [&] {
    for (;;) {
      const std::uint64_t c = next.fetch_add(1, std::memory_order_relaxed);
      if (c >= chunks) return;
      try {
        const std::uint64_t begin = c * kPathsPerChunk;
        const std::uint64_t end = std::min(path_count, begin + kPathsPerChunk);
        for (std::uint64_t p = begin; p < end; ++p) work(p, partial[c]);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(chunks);
        return;
      }
    }
  };

  const int thread_count =
      static_cast<int>(std::min<std::uint64_t>(std::max(workers, 1), chunks));
  if (thread_count <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(thread_count);
    for (int i = 0; i < thread_count; ++i) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);

  for (std::uint64_t stride = 1; stride < chunks; stride *= 2) {
    for (std::uint64_t i = 0; i + stride < chunks; i += 2 * stride) {
      merge(partial[i], partial[i + stride]);
    }
  }
  return std::move(partial[0]);
}

}  // namespace emlab
