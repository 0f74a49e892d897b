#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rvcp/core_types.hpp"
#include "rvcp/eb_normal.hpp"

namespace rvcp {

enum class Estimator { parametric, nonparametric };

std::string_view to_string(Estimator e);
Estimator parse_estimator(std::string_view text);

/// Per-item, per-candidate r-values in (0, 1], item-major.
struct RValueMatrix {
  std::vector<std::string> item_ids;
  std::size_t n_candidates = 0;
  std::vector<double> values;
  Estimator estimator = Estimator::parametric;

  std::span<const double> item(std::size_t i) const {
    return std::span<const double>(values).subspan(i * n_candidates, n_candidates);
  }
};

// Parametric estimator ------------------------------------------------------

/// r = inf{beta : obs >= t_beta(obs_var)} over the table grid, clipped to
/// [beta_1, 1]. With refine set, the crossing inside the first passing grid
/// interval is located by bisection using the exact theta_beta and z_beta
/// interpolated linearly between the bracketing grid points.
std::vector<double> r_parametric(std::span<const CandidateStat> item,
                                 const ThresholdTable& table, bool refine = true);

double r_parametric_one(const CandidateStat& stat, const ThresholdTable& table,
                        bool refine = true);

RValueMatrix r_parametric(const ScoreTensor& t, const CandidateStats& stats,
                          const ThresholdTable& table, bool refine = true);

// Nonparametric estimator ---------------------------------------------------

/// Rank frequencies of one item: counts[c * K + (k - 1)] is the number of
/// samples in which candidate c ranks within the top k (descending score,
/// ties to the lower index). V_{k/K} = count / M.
struct RankFrequencyProfile {
  std::size_t n_candidates = 0;
  std::size_t n_samples = 0;
  std::vector<std::uint32_t> counts;

  std::uint32_t count(std::size_t cand, std::size_t k) const {
    return counts[cand * n_candidates + (k - 1)];
  }
  double v(std::size_t cand, std::size_t k) const {
    return static_cast<double>(count(cand, k)) / static_cast<double>(n_samples);
  }
};

RankFrequencyProfile rank_profile(const ScoreTensor& t, std::size_t item);
std::vector<RankFrequencyProfile> rank_profiles(const ScoreTensor& t);

/// Level bars lambda_{k/K}, stored as integer count thresholds: candidate
/// passes level k iff count_k >= bar[k-1], i.e. V >= bar / M.
struct LambdaTable {
  std::size_t n_candidates = 0;
  std::size_t n_samples = 0;
  std::size_t population = 0;        // pooled candidates N * K
  std::vector<std::uint32_t> bar;    // per level k = 1..K
  std::vector<double> pass_fraction; // realised share passing each level

  double lambda(std::size_t k) const {
    return static_cast<double>(bar[k - 1]) / static_cast<double>(n_samples);
  }
};

/// Quantile matching over the pooled reference population: lambda_{k/K} is
/// the smallest attainable value with at most a k/K share of candidates at
/// or above it. Ties straddling the cut therefore fall below the bar.
LambdaTable fit_lambda(std::span<const RankFrequencyProfile> population);

/// r-values of one item against frozen bars. The grid value is
/// min{k/K : V_k >= lambda_k}. With refine set, the value is placed inside
/// ((k-1)/K, k/K] where the piecewise-linear V - lambda curve crosses zero,
/// taking V_0 = 0 and lambda_0 = 1.
std::vector<double> r_nonparametric(const RankFrequencyProfile& profile,
                                    const LambdaTable& lambda, bool refine = true);

/// Fits lambda on the tensor itself and scores every item.
RValueMatrix r_nonparametric(const ScoreTensor& t, bool refine = true);

RValueMatrix r_nonparametric(const ScoreTensor& t,
                             std::span<const RankFrequencyProfile> profiles,
                             const LambdaTable& lambda, bool refine = true);

}  // namespace rvcp
