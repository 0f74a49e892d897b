#pragma once

namespace rvcp::normal {

/// Standard normal density.
double pdf(double x);

/// Standard normal CDF, Phi(x) = erfc(-x / sqrt 2) / 2.
double cdf(double x);

/// Upper tail 1 - Phi(x), evaluated without cancellation.
double sf(double x);

/// Inverse CDF. Wichura's AS241 (PPND16) rational approximation; relative
/// accuracy about 1e-16 over (0, 1). Throws DomainError outside (0, 1).
double quantile(double p);

/// Inverse upper tail: the x with sf(x) = q, i.e. -quantile(q).
double upper_quantile(double q);

}  // namespace rvcp::normal
