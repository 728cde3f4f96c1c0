#pragma once

#include <algorithm>
#include <cstddef>
#include <thread>
#include <vector>

namespace mvspl {

// Worker cap for intra-stage parallelism (CLI --jobs). 0 = hardware default.
void set_worker_count(int jobs);
int worker_count();

// Runs fn(i) for i in [0, n). Work is chunked over worker_count() threads.
// Callers must write only to disjoint per-index slots so that results do not
// depend on the partition.
template <typename Fn>
void parallel_for(size_t n, Fn&& fn) {
  int jobs = worker_count();
  if (jobs <= 1 || n < 2) {
    for (size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  size_t threads = std::min<size_t>(jobs, n);
  size_t chunk = (n + threads - 1) / threads;
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (size_t t = 0; t < threads; ++t) {
    size_t begin = t * chunk;
    size_t end = std::min(n, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([begin, end, &fn] {
      for (size_t i = begin; i < end; ++i) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace mvspl
