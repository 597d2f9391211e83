#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace reefmap {

/// Number of workers to use; 0 means "one per hardware thread".
inline unsigned resolve_workers(unsigned requested) {
  if (requested > 0) return requested;
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

/// Splits [0, count) into at most `workers` contiguous blocks and runs
/// fn(begin, end) on each. Callers must only write to state owned by their
/// block; results are then independent of the worker count.
template <typename Fn>
void parallel_for_blocks(std::size_t count, unsigned workers, Fn&& fn) {
  const std::size_t n_workers = std::min<std::size_t>(resolve_workers(workers), std::max<std::size_t>(count, 1));
  if (n_workers <= 1) {
    if (count > 0) fn(std::size_t{0}, count);
    return;
  }
  const std::size_t chunk = (count + n_workers - 1) / n_workers;
  std::vector<std::exception_ptr> errors(n_workers);
  {
    std::vector<std::jthread> threads;
    threads.reserve(n_workers);
    for (std::size_t w = 0; w < n_workers; ++w) {
      const std::size_t begin = w * chunk;
      const std::size_t end = std::min(count, begin + chunk);
      if (begin >= end) break;
      threads.emplace_back([&, w, begin, end] {
        try {
          fn(begin, end);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace reefmap
