#include "rvcp/rvalue.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "rvcp/error.hpp"
#include "rvcp/normal.hpp"
#include "rvcp/parallel.hpp"
#include "rvcp/simd/kernels.hpp"

namespace rvcp {

std::string_view to_string(Estimator e) {
  return e == Estimator::parametric ? "parametric" : "nonparametric";
}

Estimator parse_estimator(std::string_view text) {
  if (text == "parametric") return Estimator::parametric;
  if (text == "nonparametric") return Estimator::nonparametric;
  throw Error(ErrorKind::invalid_argument,
              "unknown estimator '" + std::string(text) + "'");
}

double r_parametric_one(const CandidateStat& stat, const ThresholdTable& table,
                        bool refine) {
  const EBModel& model = table.model;
  const std::size_t g = table.size();
  const double x = (stat.obs - model.mu) / model.tau();
  const double s = stat.obs_var / model.tau2;
  const double a = 1.0 + s;
  const double c = std::sqrt(s * a);
  const std::size_t j = simd::active().first_pass(table.theta.data(), table.z.data(),
                                                  g, x, a, c);
  if (j == g) return 1.0;
  if (j == 0 || !refine) return table.beta[j];

  // Bisection on (beta_{j-1}, beta_j]: lo fails, hi passes. z is interpolated
  // linearly in theta, which is exact when g is a point mass and far better
  // than interpolating in beta near the tails.
  const double th0 = table.theta[j - 1];
  const double th1 = table.theta[j];
  const double z0 = table.z[j - 1];
  const double z1 = table.z[j];
  double lo = table.beta[j - 1];
  double hi = table.beta[j];
  for (int iter = 0; iter < 64; ++iter) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    const double theta = normal::upper_quantile(mid);
    const double w = (theta - th0) / (th1 - th0);
    const double z = z0 + w * (z1 - z0);
    const double t = theta * a - z * c;
    if (x >= t) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return hi;
}

std::vector<double> r_parametric(std::span<const CandidateStat> item,
                                 const ThresholdTable& table, bool refine) {
  std::vector<double> out;
  out.reserve(item.size());
  for (const auto& st : item) out.push_back(r_parametric_one(st, table, refine));
  return out;
}

RValueMatrix r_parametric(const ScoreTensor& t, const CandidateStats& stats,
                          const ThresholdTable& table, bool refine) {
  RValueMatrix out;
  out.item_ids = t.item_ids();
  out.n_candidates = t.n_candidates();
  out.estimator = Estimator::parametric;
  out.values.resize(stats.values.size());
  parallel_for(stats.n_items, [&](std::size_t i) {
    const auto row = stats.item(i);
    for (std::size_t c = 0; c < row.size(); ++c) {
      out.values[i * out.n_candidates + c] = r_parametric_one(row[c], table, refine);
    }
  });
  return out;
}

RankFrequencyProfile rank_profile(const ScoreTensor& t, std::size_t item) {
  const std::size_t k = t.n_candidates();
  const std::size_t m = t.n_samples();
  const auto& kernels = simd::active();

  RankFrequencyProfile p;
  p.n_candidates = k;
  p.n_samples = m;
  p.counts.assign(k * k, 0);

  std::vector<double> row(k);
  std::vector<std::uint32_t> rank(k);
  const auto block = t.item_scores(item);
  for (std::size_t s = 0; s < m; ++s) {
    for (std::size_t c = 0; c < k; ++c) row[c] = block[c * m + s];
    kernels.descending_ranks(row.data(), k, rank.data());
    for (std::size_t c = 0; c < k; ++c) ++p.counts[c * k + rank[c]];
  }
  // Histogram of ranks -> cumulative "within top k" counts.
  for (std::size_t c = 0; c < k; ++c) {
    std::uint32_t* h = p.counts.data() + c * k;
    for (std::size_t r = 1; r < k; ++r) h[r] += h[r - 1];
  }
  return p;
}

std::vector<RankFrequencyProfile> rank_profiles(const ScoreTensor& t) {
  std::vector<RankFrequencyProfile> out(t.n_items());
  parallel_for(t.n_items(), [&](std::size_t i) { out[i] = rank_profile(t, i); });
  return out;
}

LambdaTable fit_lambda(std::span<const RankFrequencyProfile> population) {
  if (population.empty()) {
    throw Error(ErrorKind::empty_population,
                "nonparametric r-values need a non-empty reference population");
  }
  const std::size_t k = population.front().n_candidates;
  const std::size_t m = population.front().n_samples;
  for (const auto& p : population) {
    if (p.n_candidates != k || p.n_samples != m) {
      throw Error(ErrorKind::shape_mismatch,
                  "reference population mixes different K or M");
    }
  }
  const std::size_t n = population.size();
  if (n * k < 2) {
    throw Error(ErrorKind::empty_population,
                "reference population needs at least 2 candidates");
  }

  LambdaTable table;
  table.n_candidates = k;
  table.n_samples = m;
  table.population = n * k;
  table.bar.resize(k);
  table.pass_fraction.resize(k);

  std::vector<std::size_t> hist(m + 1);
  for (std::size_t level = 1; level <= k; ++level) {
    std::fill(hist.begin(), hist.end(), 0);
    for (const auto& p : population) {
      for (std::size_t c = 0; c < k; ++c) ++hist[p.count(c, level)];
    }
    // Smallest bar v with #{count >= v} <= level * n.
    const std::size_t target = level * n;
    std::size_t at_or_above = 0;
    std::size_t bar = m + 1;
    for (std::size_t v = m + 1; v-- > 0;) {
      if (at_or_above + hist[v] > target) break;
      at_or_above += hist[v];
      bar = v;
    }
    table.bar[level - 1] = static_cast<std::uint32_t>(bar);
    table.pass_fraction[level - 1] =
        static_cast<double>(at_or_above) / static_cast<double>(n * k);
  }
  return table;
}

std::vector<double> r_nonparametric(const RankFrequencyProfile& profile,
                                    const LambdaTable& lambda, bool refine) {
  const std::size_t k = profile.n_candidates;
  if (k != lambda.n_candidates || profile.n_samples != lambda.n_samples) {
    throw Error(ErrorKind::shape_mismatch,
                "profile shape differs from the frozen lambda table");
  }
  const double kd = static_cast<double>(k);
  std::vector<double> out(k, 1.0);
  for (std::size_t c = 0; c < k; ++c) {
    std::size_t level = 1;
    while (level <= k && profile.count(c, level) < lambda.bar[level - 1]) ++level;
    if (level > k) continue;  // unreachable: level K always passes
    if (!refine) {
      out[c] = static_cast<double>(level) / kd;
      continue;
    }
    const double h_prev =
        level == 1 ? -1.0 : profile.v(c, level - 1) - lambda.lambda(level - 1);
    const double h_cur = profile.v(c, level) - lambda.lambda(level);
    const double frac = -h_prev / (h_cur - h_prev);
    out[c] = (static_cast<double>(level - 1) + frac) / kd;
  }
  return out;
}

RValueMatrix r_nonparametric(const ScoreTensor& t,
                             std::span<const RankFrequencyProfile> profiles,
                             const LambdaTable& lambda, bool refine) {
  RValueMatrix out;
  out.item_ids = t.item_ids();
  out.n_candidates = t.n_candidates();
  out.estimator = Estimator::nonparametric;
  out.values.resize(t.n_items() * t.n_candidates());
  parallel_for(t.n_items(), [&](std::size_t i) {
    const auto r = r_nonparametric(profiles[i], lambda, refine);
    std::copy(r.begin(), r.end(), out.values.begin() + i * out.n_candidates);
  });
  return out;
}

RValueMatrix r_nonparametric(const ScoreTensor& t, bool refine) {
  const auto profiles = rank_profiles(t);
  const auto lambda = fit_lambda(profiles);
  return r_nonparametric(t, profiles, lambda, refine);
}

}  // namespace rvcp
