#pragma once

#include <cstddef>
#include <functional>

namespace rvcp {

/// Worker count from RVCP_THREADS (0 or unset = hardware concurrency).
std::size_t worker_count();

/// Runs body(i) for i in [0, n). Each index is visited exactly once; callers
/// write into per-index slots so results never depend on scheduling.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace rvcp
