#pragma once

// Data-parallel inner loops behind a runtime-selected dispatch table.
//
// Every backend produces bit-identical results to the scalar reference:
// reductions use a fixed 4-lane accumulation order and no kernel relies on
// fused multiply-add.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace rvcp::simd {

enum class Backend { scalar, avx2, neon };

std::string_view to_string(Backend backend);

struct Kernels {
  Backend backend;

  /// Sum of x, accumulated in four interleaved lanes.
  double (*sum)(const double* x, std::size_t n);

  /// Sum of (x - centre)^2, same lane order as sum.
  double (*sum_sq_dev)(const double* x, std::size_t n, double centre);

  /// First j in [0, n) with x >= theta[j] * a - z[j] * c, or n if none.
  std::size_t (*first_pass)(const double* theta, const double* z,
                            std::size_t n, double x, double a, double c);

  /// rank[i] = #{j : row[j] > row[i]} + #{j < i : row[j] == row[i]}; the
  /// 0-based descending rank with ties going to the lower index.
  void (*descending_ranks)(const double* row, std::size_t n,
                           std::uint32_t* rank);
};

bool backend_available(Backend backend);
std::vector<Backend> available_backends();

/// Kernels for a specific backend; throws if it is unavailable on this CPU.
const Kernels& kernels_for(Backend backend);

/// Process-wide kernels: the best available backend unless RVCP_SIMD names
/// one ("scalar", "avx2", "neon").
const Kernels& active();

// Backend entry points, defined per translation unit.
namespace scalar {
const Kernels& table();
}
namespace avx2 {
const Kernels& table();
}
namespace neon {
const Kernels& table();
}

}  // namespace rvcp::simd
