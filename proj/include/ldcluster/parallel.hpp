#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace ldcluster {

/// Thread count from the LDCLUSTER_THREADS environment variable, or
/// `fallback` when unset or unparsable.
inline int threads_from_env(int fallback) {
  if (const char* v = std::getenv("LDCLUSTER_THREADS")) {
    try {
      const int t = std::stoi(v);
      if (t >= 1) return t;
    } catch (...) {
    }
  }
  return fallback;
}

/// Runs body(index, worker) for index in [0, count) on `threads` workers.
/// Work is handed out by an atomic counter, so callers must write results
/// into per-index slots; any reduction happens afterwards in index order.
/// The first exception thrown by a worker is rethrown on the caller.
template <class Body>
void parallel_for(std::size_t count, int threads, Body&& body) {
  const int workers = std::max(1, std::min<int>(threads, static_cast<int>(std::max<std::size_t>(count, 1))));
  if (workers == 1) {
    for (std::size_t i = 0; i < count; ++i) body(i, 0);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mutex;
  {
    std::vector<std::jthread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        while (!failed.load(std::memory_order_relaxed)) {
          const std::size_t i = next.fetch_add(1, std::memory_order_relaxed);
          if (i >= count) break;
          try {
            body(i, w);
          } catch (...) {
            std::lock_guard lock(error_mutex);
            if (!error) error = std::current_exception();
            failed = true;
          }
        }
      });
    }
  }
  if (error) std::rethrow_exception(error);
}

}  // namespace ldcluster
