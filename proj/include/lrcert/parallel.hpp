#pragma once

// Minimal worker-pool parallel_for. Work items are indexed; any per-item
// randomness must derive its stream from the item index so results do not
// depend on the thread count.

#include <atomic>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace lrcert {

inline int& global_thread_cap() {
  static int cap = 0;  // 0 = use hardware_concurrency()
  return cap;
}

inline int effective_threads(std::size_t items) {
  int hw = static_cast<int>(std::thread::hardware_concurrency());
  if (hw < 1) hw = 1;
  int cap = global_thread_cap();
  int n = (cap > 0) ? cap : hw;
  if (static_cast<std::size_t>(n) > items) n = static_cast<int>(items);
  return n < 1 ? 1 : n;
}

namespace detail {
inline bool& inside_parallel_worker() {
  thread_local bool inside = false;
  return inside;
}
}  // namespace detail

inline void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body) {
  if (count == 0) return;
  int workers = effective_threads(count);
  // Nested parallel regions run sequentially to avoid oversubscription.
  if (workers == 1 || detail::inside_parallel_worker()) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::mutex err_mutex;
  std::exception_ptr first_error;
  auto run = [&]() {
    detail::inside_parallel_worker() = true;
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mutex);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) pool.emplace_back(run);
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace lrcert
