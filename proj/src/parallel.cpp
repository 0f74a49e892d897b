#include "rvcp/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace rvcp {

std::size_t worker_count() {
  std::size_t n = 0;
  if (const char* env = std::getenv("RVCP_THREADS"); env != nullptr) {
    try {
      n = static_cast<std::size_t>(std::stoul(env));
    } catch (const std::exception&) {
      n = 0;
    }
  }
  if (n == 0) n = std::max(1u, std::thread::hardware_concurrency());
  return n;
}

namespace {
// Nested loops run inline on the calling worker.
thread_local bool in_parallel_region = false;
}  // namespace

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body) {
  const std::size_t workers = in_parallel_region ? 1 : std::min(worker_count(), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto run = [&] {
    in_parallel_region = true;
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) break;
      try {
        body(i);
      } catch (...) {
        std::lock_guard lock(failure_mu);
        if (!failure) failure = std::current_exception();
        next.store(n);
      }
    }
    in_parallel_region = false;
  };
  std::vector<std::jthread> pool;
  pool.reserve(workers - 1);
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(run);
  run();
  pool.clear();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace rvcp
