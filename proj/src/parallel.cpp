#include "mvspl/parallel.hpp"

#include <atomic>

namespace mvspl {

namespace {
std::atomic<int> g_jobs{0};
}

void set_worker_count(int jobs) { g_jobs.store(jobs < 0 ? 0 : jobs); }

int worker_count() {
  int j = g_jobs.load();
  if (j > 0) return j;
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

}  // namespace mvspl
