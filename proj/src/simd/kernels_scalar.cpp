#include "rvcp/simd/kernels.hpp"

namespace rvcp::simd::scalar {
namespace {

double sum(const double* x, std::size_t n) {
  double acc[4] = {0.0, 0.0, 0.0, 0.0};
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    for (std::size_t l = 0; l < 4; ++l) acc[l] += x[i + l];
  }
  double s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
  for (; i < n; ++i) s += x[i];
  return s;
}

double sum_sq_dev(const double* x, std::size_t n, double centre) {
  double acc[4] = {0.0, 0.0, 0.0, 0.0};
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    for (std::size_t l = 0; l < 4; ++l) {
      const double d = x[i + l] - centre;
      acc[l] += d * d;
    }
  }
  double s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
  for (; i < n; ++i) {
    const double d = x[i] - centre;
    s += d * d;
  }
  return s;
}

std::size_t first_pass(const double* theta, const double* z, std::size_t n,
                       double x, double a, double c) {
  for (std::size_t j = 0; j < n; ++j) {
    const double t = theta[j] * a - z[j] * c;
    if (x >= t) return j;
  }
  return n;
}

void descending_ranks(const double* row, std::size_t n, std::uint32_t* rank) {
  for (std::size_t i = 0; i < n; ++i) {
    const double v = row[i];
    std::uint32_t r = 0;
    for (std::size_t j = 0; j < i; ++j) r += row[j] >= v;
    for (std::size_t j = i + 1; j < n; ++j) r += row[j] > v;
    rank[i] = r;
  }
}

}  // namespace

const Kernels& table() {
  static const Kernels k{Backend::scalar, &sum, &sum_sq_dev, &first_pass,
                         &descending_ranks};
  return k;
}

}  // namespace rvcp::simd::scalar
