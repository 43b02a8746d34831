#pragma once

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace mfaoa {

/// Worker count: explicit request, else MFAOA_THREADS, else hardware concurrency.
inline unsigned resolve_threads(unsigned requested = 0) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("MFAOA_THREADS")) {
    try {
      const long v = std::stol(env);
      if (v > 0) return static_cast<unsigned>(v);
    } catch (...) {
    }
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Calls body(i) for i in [0, count) on up to `threads` workers. The first
/// exception thrown by any task is rethrown after all workers have joined.
template <class Body>
void parallel_for(std::size_t count, unsigned threads, Body&& body) {
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(count, 1))));
  if (threads == 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        body(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(count);
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace mfaoa
