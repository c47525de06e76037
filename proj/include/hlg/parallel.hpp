#pragma once

// Deterministic fork-join over an index range. Each index owns its output slot and
// reductions happen afterwards in index order, so results never depend on the worker count.

#include <algorithm>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace hlg {

/// Worker count from HLG_WORKERS, else 1.
inline int default_workers()
{
  if (const char * env = std::getenv("HLG_WORKERS")) {
    try {
      const int v = std::stoi(env);
      if (v >= 1) { return v; }
    } catch (...) {
    }
  }
  return 1;
}

/// Calls fn(i) for i in [0, count) on `workers` threads using static contiguous chunks.
template <class Fn>
void parallel_for(std::size_t count, int workers, Fn && fn)
{
  const std::size_t w = std::min<std::size_t>(static_cast<std::size_t>(std::max(workers, 1)), std::max<std::size_t>(count, 1));
  if (w <= 1) {
    for (std::size_t i = 0; i < count; ++i) { fn(i); }
    return;
  }
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::thread> threads;
  threads.reserve(w);
  for (std::size_t t = 0; t < w; ++t) {
    const std::size_t begin = count * t / w;
    const std::size_t end = count * (t + 1) / w;
    threads.emplace_back([&, begin, end] {
      try {
        for (std::size_t i = begin; i < end; ++i) { fn(i); }
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!first_error) { first_error = std::current_exception(); }
      }
    });
  }
  for (auto & th : threads) { th.join(); }
  if (first_error) { std::rethrow_exception(first_error); }
}

}  // namespace hlg
