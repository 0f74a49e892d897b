#include <arm_neon.h>

#include "rvcp/simd/kernels.hpp"

// Two float64x2 accumulators stand in for the four scalar lanes so the
// reduction order matches the reference exactly.

namespace rvcp::simd::neon {
namespace {

inline double fold(float64x2_t lo, float64x2_t hi) {
  return (vgetq_lane_f64(lo, 0) + vgetq_lane_f64(lo, 1)) +
         (vgetq_lane_f64(hi, 0) + vgetq_lane_f64(hi, 1));
}

double sum(const double* x, std::size_t n) {
  float64x2_t lo = vdupq_n_f64(0.0);
  float64x2_t hi = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    lo = vaddq_f64(lo, vld1q_f64(x + i));
    hi = vaddq_f64(hi, vld1q_f64(x + i + 2));
  }
  double s = fold(lo, hi);
  for (; i < n; ++i) s += x[i];
  return s;
}

double sum_sq_dev(const double* x, std::size_t n, double centre) {
  const float64x2_t c = vdupq_n_f64(centre);
  float64x2_t lo = vdupq_n_f64(0.0);
  float64x2_t hi = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const float64x2_t d0 = vsubq_f64(vld1q_f64(x + i), c);
    const float64x2_t d1 = vsubq_f64(vld1q_f64(x + i + 2), c);
    lo = vaddq_f64(lo, vmulq_f64(d0, d0));
    hi = vaddq_f64(hi, vmulq_f64(d1, d1));
  }
  double s = fold(lo, hi);
  for (; i < n; ++i) {
    const double d = x[i] - centre;
    s += d * d;
  }
  return s;
}

std::size_t first_pass(const double* theta, const double* z, std::size_t n,
                       double x, double a, double c) {
  const float64x2_t xv = vdupq_n_f64(x);
  const float64x2_t av = vdupq_n_f64(a);
  const float64x2_t cv = vdupq_n_f64(c);
  std::size_t j = 0;
  for (; j + 2 <= n; j += 2) {
    const float64x2_t t = vsubq_f64(vmulq_f64(vld1q_f64(theta + j), av),
                                    vmulq_f64(vld1q_f64(z + j), cv));
    const uint64x2_t ge = vcgeq_f64(xv, t);
    if (vgetq_lane_u64(ge, 0)) return j;
    if (vgetq_lane_u64(ge, 1)) return j + 1;
  }
  for (; j < n; ++j) {
    const double t = theta[j] * a - z[j] * c;
    if (x >= t) return j;
  }
  return n;
}

void descending_ranks(const double* row, std::size_t n, std::uint32_t* rank) {
  for (std::size_t i = 0; i < n; ++i) {
    const double v = row[i];
    const float64x2_t vv = vdupq_n_f64(v);
    std::uint64_t r = 0;
    std::size_t j = 0;
    for (; j + 2 <= i; j += 2) {
      const uint64x2_t m = vcgeq_f64(vld1q_f64(row + j), vv);
      r += (vgetq_lane_u64(m, 0) & 1u) + (vgetq_lane_u64(m, 1) & 1u);
    }
    for (; j < i; ++j) r += row[j] >= v;
    j = i + 1;
    for (; j + 2 <= n; j += 2) {
      const uint64x2_t m = vcgtq_f64(vld1q_f64(row + j), vv);
      r += (vgetq_lane_u64(m, 0) & 1u) + (vgetq_lane_u64(m, 1) & 1u);
    }
    for (; j < n; ++j) r += row[j] > v;
    rank[i] = static_cast<std::uint32_t>(r);
  }
}

}  // namespace

const Kernels& table() {
  static const Kernels k{Backend::neon, &sum, &sum_sq_dev, &first_pass,
                         &descending_ranks};
  return k;
}

}  // namespace rvcp::simd::neon
