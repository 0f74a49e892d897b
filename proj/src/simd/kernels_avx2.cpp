#include <immintrin.h>

#include "rvcp/simd/kernels.hpp"

namespace rvcp::simd::avx2 {
namespace {

inline double fold(__m256d v) {
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, v);
  return (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
}

double sum(const double* x, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(x + i));
  double s = fold(acc);
  for (; i < n; ++i) s += x[i];
  return s;
}

double sum_sq_dev(const double* x, std::size_t n, double centre) {
  const __m256d c = _mm256_set1_pd(centre);
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(x + i), c);
    acc = _mm256_add_pd(acc, _mm256_mul_pd(d, d));
  }
  double s = fold(acc);
  for (; i < n; ++i) {
    const double d = x[i] - centre;
    s += d * d;
  }
  return s;
}

std::size_t first_pass(const double* theta, const double* z, std::size_t n,
                       double x, double a, double c) {
  const __m256d xv = _mm256_set1_pd(x);
  const __m256d av = _mm256_set1_pd(a);
  const __m256d cv = _mm256_set1_pd(c);
  std::size_t j = 0;
  for (; j + 4 <= n; j += 4) {
    const __m256d t = _mm256_sub_pd(_mm256_mul_pd(_mm256_loadu_pd(theta + j), av),
                                    _mm256_mul_pd(_mm256_loadu_pd(z + j), cv));
    const int mask = _mm256_movemask_pd(_mm256_cmp_pd(xv, t, _CMP_GE_OQ));
    if (mask != 0) return j + static_cast<std::size_t>(__builtin_ctz(mask));
  }
  for (; j < n; ++j) {
    const double t = theta[j] * a - z[j] * c;
    if (x >= t) return j;
  }
  return n;
}

template <int Pred>
std::uint32_t count_cmp(const double* row, std::size_t begin, std::size_t end,
                        double v) {
  const __m256d vv = _mm256_set1_pd(v);
  std::uint32_t r = 0;
  std::size_t j = begin;
  for (; j + 4 <= end; j += 4) {
    const int mask =
        _mm256_movemask_pd(_mm256_cmp_pd(_mm256_loadu_pd(row + j), vv, Pred));
    r += static_cast<std::uint32_t>(__builtin_popcount(mask));
  }
  for (; j < end; ++j) {
    if constexpr (Pred == _CMP_GE_OQ) {
      r += row[j] >= v;
    } else {
      r += row[j] > v;
    }
  }
  return r;
}

void descending_ranks(const double* row, std::size_t n, std::uint32_t* rank) {
  for (std::size_t i = 0; i < n; ++i) {
    const double v = row[i];
    rank[i] = count_cmp<_CMP_GE_OQ>(row, 0, i, v) +
              count_cmp<_CMP_GT_OQ>(row, i + 1, n, v);
  }
}

}  // namespace

const Kernels& table() {
  static const Kernels k{Backend::avx2, &sum, &sum_sq_dev, &first_pass,
                         &descending_ranks};
  return k;
}

}  // namespace rvcp::simd::avx2
