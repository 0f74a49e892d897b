#pragma once

// Normal-Normal empirical Bayes: hyperparameter fit, posterior shrinkage,
// the variance-dependent selection threshold and its calibration constant.
//
// Threshold and constraint computations run in standardized units
// (x - mu) / tau with variance s / tau^2, where the prior is N(0, 1):
//
//   t(s)  = theta * (1 + s) - z * sqrt(s * (1 + s))
//   F(u)  = E_g[ Phi(theta * sqrt(1 + s) - u * sqrt(s)) ]
//
// and z_beta is the root of F(u) = 1 - beta. Results in data units are
// mu + tau * t.

#include <cstddef>
#include <span>
#include <vector>

#include "rvcp/core_types.hpp"

namespace rvcp {

inline constexpr double kTau2Floor = 1e-8;
inline constexpr std::size_t kDefaultGridSize = 999;
inline constexpr std::size_t kDefaultMaxGNodes = 256;

struct FitDiagnostics {
  std::size_t n = 0;
  double obs_mean = 0.0;
  double obs_variance = 0.0;   // unbiased variance of obs
  double mean_obs_var = 0.0;   // average of obs_var
  double raw_tau2 = 0.0;       // moment estimate before flooring
  bool tau2_floored = false;
  std::size_t zero_variance_count = 0;
};

struct EBModel {
  double mu = 0.0;
  double tau2 = 1.0;
  /// Plug-in distribution of obs_var: equal-weight multiset, sorted.
  std::vector<double> g_support;
  /// Equal-weight quantile nodes of g_support in standardized units
  /// (s / tau2). Identical to the standardized support when it has at most
  /// max_g_nodes entries.
  std::vector<double> g_nodes;
  FitDiagnostics diagnostics;

  double tau() const;
  bool degenerate_g() const;
};

/// Builds a model from explicit hyperparameters; support values in data units.
EBModel make_model(double mu, double tau2, std::vector<double> g_support,
                   std::size_t max_g_nodes = kDefaultMaxGNodes);

/// Method-of-moments fit over pooled candidate statistics. With
/// variance_aware set, an all-zero obs_var population raises AllZeroVariance.
EBModel fit_eb(std::span<const CandidateStat> stats, bool variance_aware = true,
               std::size_t max_g_nodes = kDefaultMaxGNodes);

struct Posterior {
  double mean = 0.0;
  double var = 0.0;
};

Posterior posterior(double obs, double obs_var, const EBModel& model);

/// theta_beta = mu + tau * Phi^{-1}(1 - beta), in data units.
double theta_quantile(double beta, const EBModel& model);

/// Standardized theta_beta, Phi^{-1}(1 - beta).
double theta_quantile_std(double beta);

/// F(u) - (1 - beta) over the model's g nodes.
double marginal_residual(double beta, double z, const EBModel& model);

/// Root of F(u) = 1 - beta by bracketed bisection.
double solve_z_beta(double beta, const EBModel& model);

/// Standardized threshold t(s) for given standardized theta, z and variance.
double threshold_std(double theta_std, double z, double s_std);

/// Threshold in data units at variance sigma2; solves z_beta first.
double threshold(double beta, double sigma2, const EBModel& model);

struct ThresholdTable {
  std::vector<double> beta;   // strictly increasing, j / (G + 1)
  std::vector<double> theta;  // standardized theta_beta
  std::vector<double> z;      // standardized z_beta
  EBModel model;
  /// Built for a zero-variance population: z is unused and stored as 0.
  bool zero_variance = false;
  double max_residual = 0.0;

  std::size_t size() const noexcept { return beta.size(); }

  /// Data-unit threshold at grid point j.
  double threshold_at(std::size_t j, double sigma2) const;
};

ThresholdTable build_threshold_table(const EBModel& model,
                                     std::size_t grid_size = kDefaultGridSize);

/// Table for models whose variance distribution is a point mass at zero,
/// where t(0) = theta for every z.
ThresholdTable build_zero_variance_table(const EBModel& model,
                                         std::size_t grid_size = kDefaultGridSize);

/// Throws if the table breaks an ordering or residual invariant.
void check_table(const ThresholdTable& table);

struct ConjugateVariance {
  double s_star = 0.0;  // minimiser of t on [0, inf)
  double s_conj = 0.0;  // t(s) >= t(0) for every s >= s_conj
};

/// Both constants in standardized units. z <= 0 gives {0, 0}; with
/// z >= theta neither is defined and both are NaN.
ConjugateVariance conjugate_variance(double theta_std, double z);

}  // namespace rvcp
