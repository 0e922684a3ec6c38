#pragma once

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace fpad {

// Resolve the worker count: explicit request > PAD_THREADS > hardware.
inline unsigned resolve_threads(int requested) {
  if (requested > 0) return static_cast<unsigned>(requested);
  if (const char* env = std::getenv("PAD_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return static_cast<unsigned>(v);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? hw : 1;
}

// Runs fn(chunk_index, begin, end) over a fixed chunk grid. The grid depends
// only on (n, chunk_size), never on the thread count, so per-chunk results
// reduced in chunk order are bit-identical for any number of workers.
template <typename Fn>
void parallel_chunks(std::size_t n, std::size_t chunk_size, unsigned threads,
                     Fn&& fn) {
  if (n == 0) return;
  if (chunk_size == 0) chunk_size = 1;
  const std::size_t n_chunks = (n + chunk_size - 1) / chunk_size;
  if (threads <= 1 || n_chunks == 1) {
    for (std::size_t c = 0; c < n_chunks; ++c)
      fn(c, c * chunk_size, std::min(n, (c + 1) * chunk_size));
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t c = next.fetch_add(1);
      if (c >= n_chunks) return;
      try {
        fn(c, c * chunk_size, std::min(n, (c + 1) * chunk_size));
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  const unsigned n_workers =
      std::min<std::size_t>(threads, n_chunks);
  pool.reserve(n_workers);
  for (unsigned t = 0; t < n_workers; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

// Element-wise parallel map: fn(i) writes only to its own output slot.
template <typename Fn>
void parallel_for(std::size_t n, unsigned threads, Fn&& fn) {
  parallel_chunks(n, std::max<std::size_t>(1, n / (4 * std::max(1u, threads)) + 1),
                  threads, [&](std::size_t, std::size_t b, std::size_t e) {
                    for (std::size_t i = b; i < e; ++i) fn(i);
                  });
}

}  // namespace fpad
