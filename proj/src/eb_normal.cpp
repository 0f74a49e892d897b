#include "rvcp/eb_normal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "rvcp/error.hpp"
#include "rvcp/normal.hpp"
#include "rvcp/parallel.hpp"

namespace rvcp {

namespace {

std::vector<double> quantile_nodes(const std::vector<double>& sorted,
                                   double tau2, std::size_t max_nodes) {
  const std::size_t n = sorted.size();
  std::vector<double> nodes;
  if (n <= max_nodes || max_nodes == 0) {
    nodes.reserve(n);
    for (double s : sorted) nodes.push_back(s / tau2);
    return nodes;
  }
  // Midpoint of each equal-probability bin. Duplicating every support entry
  // selects the same order statistics, so the nodes are unchanged.
  nodes.reserve(max_nodes);
  for (std::size_t j = 0; j < max_nodes; ++j) {
    const std::size_t idx = ((2 * j + 1) * n) / (2 * max_nodes);
    nodes.push_back(sorted[idx] / tau2);
  }
  return nodes;
}

// Precomputed sqrt(1 + s) and sqrt(s) for F(u).
struct ConstraintTerms {
  std::vector<double> root_one_plus;
  std::vector<double> root_s;

  explicit ConstraintTerms(const std::vector<double>& nodes) {
    root_one_plus.reserve(nodes.size());
    root_s.reserve(nodes.size());
    for (double s : nodes) {
      root_one_plus.push_back(std::sqrt(1.0 + s));
      root_s.push_back(std::sqrt(s));
    }
  }

  double mean_cdf(double theta, double u) const {
    double acc = 0.0;
    for (std::size_t j = 0; j < root_s.size(); ++j) {
      acc += normal::cdf(theta * root_one_plus[j] - u * root_s[j]);
    }
    return acc / static_cast<double>(root_s.size());
  }
};

double solve_z(double beta, const ConstraintTerms& terms) {
  const double theta = theta_quantile_std(beta);
  const double target = 1.0 - beta;
  auto f = [&](double u) { return terms.mean_cdf(theta, u); };

  // F is strictly decreasing. F(max(theta, 0)) <= 1 - beta holds for any g
  // with mass above zero; the lower end is widened until F exceeds target.
  double hi = std::max(theta, 0.0);
  double lo = -50.0;
  for (int i = 0; f(lo) <= target; ++i) {
    if (i == 64) {
      throw Error(ErrorKind::degenerate_g,
                  "z_beta bracket search failed at beta=" + std::to_string(beta));
    }
    lo *= 2.0;
  }
  for (int i = 0; f(hi) > target; ++i) {
    if (i == 64) {
      throw Error(ErrorKind::degenerate_g,
                  "z_beta bracket search failed at beta=" + std::to_string(beta));
    }
    hi = hi <= 0.0 ? 1.0 : hi * 2.0;
  }

  for (int iter = 0; iter < 200; ++iter) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    const double fm = f(mid);
    if (fm == target) return mid;
    if (fm > target) {
      lo = mid;
    } else {
      hi = mid;
    }
    if (hi - lo <= 1e-13 * std::max(1.0, std::abs(mid))) break;
  }
  return 0.5 * (lo + hi);
}

void require_nondegenerate(const EBModel& model) {
  if (model.degenerate_g()) {
    throw Error(ErrorKind::degenerate_g,
                "variance distribution g is a point mass at 0; z_beta is undefined");
  }
}

void require_beta(double beta) {
  if (!(beta > 0.0 && beta < 1.0)) {
    throw Error(ErrorKind::domain_error,
                "beta must lie in (0,1), got " + std::to_string(beta));
  }
}

std::vector<double> uniform_grid(std::size_t grid_size) {
  if (grid_size < 2) {
    throw Error(ErrorKind::invalid_argument, "threshold grid size must be >= 2");
  }
  std::vector<double> beta(grid_size);
  for (std::size_t j = 0; j < grid_size; ++j) {
    beta[j] = static_cast<double>(j + 1) / static_cast<double>(grid_size + 1);
  }
  return beta;
}

}  // namespace

double EBModel::tau() const { return std::sqrt(tau2); }

bool EBModel::degenerate_g() const {
  return std::none_of(g_nodes.begin(), g_nodes.end(),
                      [](double s) { return s > 0.0; });
}

EBModel make_model(double mu, double tau2, std::vector<double> g_support,
                   std::size_t max_g_nodes) {
  if (!std::isfinite(mu) || !(tau2 > 0.0) || !std::isfinite(tau2)) {
    throw Error(ErrorKind::invalid_argument,
                "EB model needs finite mu and tau2 > 0");
  }
  if (g_support.empty()) {
    throw Error(ErrorKind::invalid_argument, "g_support must be non-empty");
  }
  for (double s : g_support) {
    if (!(s >= 0.0) || !std::isfinite(s)) {
      throw Error(ErrorKind::invalid_argument,
                  "g_support entries must be finite and >= 0");
    }
  }
  std::sort(g_support.begin(), g_support.end());
  EBModel model;
  model.mu = mu;
  model.tau2 = std::max(tau2, kTau2Floor);
  model.g_nodes = quantile_nodes(g_support, model.tau2, max_g_nodes);
  model.g_support = std::move(g_support);
  return model;
}

EBModel fit_eb(std::span<const CandidateStat> stats, bool variance_aware,
               std::size_t max_g_nodes) {
  const std::size_t n = stats.size();
  if (n < 2) {
    throw Error(ErrorKind::empty_population,
                "empirical Bayes fit needs at least 2 candidates, got " +
                    std::to_string(n));
  }
  FitDiagnostics d;
  d.n = n;
  double sum = 0.0;
  double var_sum = 0.0;
  std::vector<double> support;
  support.reserve(n);
  for (const auto& st : stats) {
    sum += st.obs;
    var_sum += st.obs_var;
    support.push_back(st.obs_var);
    d.zero_variance_count += st.obs_var == 0.0;
  }
  d.obs_mean = sum / static_cast<double>(n);
  double ss = 0.0;
  for (const auto& st : stats) {
    const double dv = st.obs - d.obs_mean;
    ss += dv * dv;
  }
  d.obs_variance = ss / static_cast<double>(n - 1);
  d.mean_obs_var = var_sum / static_cast<double>(n);
  d.raw_tau2 = d.obs_variance - d.mean_obs_var;
  d.tau2_floored = !(d.raw_tau2 >= kTau2Floor);

  if (variance_aware && d.zero_variance_count == n) {
    throw Error(ErrorKind::all_zero_variance,
                "every obs_var is 0; use the zero-variance mode (average-then-CP limit)");
  }

  EBModel model = make_model(d.obs_mean, d.tau2_floored ? kTau2Floor : d.raw_tau2,
                             std::move(support), max_g_nodes);
  model.diagnostics = d;
  return model;
}

Posterior posterior(double obs, double obs_var, const EBModel& model) {
  const double denom = model.tau2 + obs_var;
  return {(model.tau2 * obs + obs_var * model.mu) / denom,
          model.tau2 * obs_var / denom};
}

double theta_quantile_std(double beta) {
  require_beta(beta);
  return normal::upper_quantile(beta);
}

double theta_quantile(double beta, const EBModel& model) {
  return model.mu + model.tau() * theta_quantile_std(beta);
}

double marginal_residual(double beta, double z, const EBModel& model) {
  const ConstraintTerms terms(model.g_nodes);
  return terms.mean_cdf(theta_quantile_std(beta), z) - (1.0 - beta);
}

double solve_z_beta(double beta, const EBModel& model) {
  require_beta(beta);
  require_nondegenerate(model);
  return solve_z(beta, ConstraintTerms(model.g_nodes));
}

double threshold_std(double theta_std, double z, double s_std) {
  const double a = 1.0 + s_std;
  return theta_std * a - z * std::sqrt(s_std * a);
}

double threshold(double beta, double sigma2, const EBModel& model) {
  const double s_std = sigma2 / model.tau2;
  const double z = s_std > 0.0 ? solve_z_beta(beta, model) : 0.0;
  return model.mu + model.tau() * threshold_std(theta_quantile_std(beta), z, s_std);
}

double ThresholdTable::threshold_at(std::size_t j, double sigma2) const {
  return model.mu +
         model.tau() * threshold_std(theta[j], z[j], sigma2 / model.tau2);
}

ThresholdTable build_threshold_table(const EBModel& model, std::size_t grid_size) {
  require_nondegenerate(model);
  ThresholdTable table;
  table.beta = uniform_grid(grid_size);
  table.model = model;
  table.theta.resize(grid_size);
  table.z.resize(grid_size);
  std::vector<double> residual(grid_size);
  const ConstraintTerms terms(model.g_nodes);
  parallel_for(grid_size, [&](std::size_t j) {
    const double beta = table.beta[j];
    table.theta[j] = theta_quantile_std(beta);
    table.z[j] = solve_z(beta, terms);
    residual[j] =
        std::abs(terms.mean_cdf(table.theta[j], table.z[j]) - (1.0 - beta));
  });
  table.max_residual = *std::max_element(residual.begin(), residual.end());
  check_table(table);
  return table;
}

ThresholdTable build_zero_variance_table(const EBModel& model,
                                         std::size_t grid_size) {
  ThresholdTable table;
  table.beta = uniform_grid(grid_size);
  table.model = model;
  table.zero_variance = true;
  table.theta.resize(grid_size);
  table.z.assign(grid_size, 0.0);
  for (std::size_t j = 0; j < grid_size; ++j) {
    table.theta[j] = theta_quantile_std(table.beta[j]);
  }
  check_table(table);
  return table;
}

void check_table(const ThresholdTable& table) {
  const std::size_t g = table.size();
  if (table.theta.size() != g || table.z.size() != g || g < 2) {
    throw Error(ErrorKind::invalid_argument, "threshold table arrays disagree in length");
  }
  for (std::size_t j = 0; j < g; ++j) {
    if (!(table.beta[j] > 0.0 && table.beta[j] < 1.0) ||
        (j > 0 && !(table.beta[j] > table.beta[j - 1]))) {
      throw Error(ErrorKind::invalid_argument, "beta grid must increase within (0,1)");
    }
    if (j > 0 && !(table.theta[j] < table.theta[j - 1])) {
      throw Error(ErrorKind::invalid_argument, "theta_beta must strictly decrease");
    }
    // z < theta is only guaranteed where theta > 0; for beta > 1/2 the root
    // lies above theta.
    if (!table.zero_variance && table.theta[j] > 0.0 &&
        !(table.z[j] < table.theta[j])) {
      throw Error(ErrorKind::invalid_argument,
                  "z_beta >= theta_beta at beta=" + std::to_string(table.beta[j]));
    }
  }
  if (table.zero_variance) return;
  // Recompute rather than trust the stored figure, so edited tables are caught.
  double worst = 0.0;
  for (std::size_t j = 0; j < g; ++j) {
    worst = std::max(worst, std::abs(marginal_residual(table.beta[j], table.z[j], table.model)));
  }
  if (!(worst <= 1e-8) || !(table.max_residual <= 1e-8)) {
    throw Error(ErrorKind::invalid_argument,
                "marginal constraint residual " + std::to_string(worst) + " exceeds 1e-8");
  }
}

ConjugateVariance conjugate_variance(double theta_std, double z) {
  if (z <= 0.0) return {0.0, 0.0};
  if (!(z < theta_std)) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    return {nan, nan};
  }
  const double gap = theta_std * theta_std - z * z;
  return {0.5 * (theta_std / std::sqrt(gap) - 1.0), z * z / gap};
}

}  // namespace rvcp
