#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rvcp/conformal.hpp"
#include "rvcp/core_types.hpp"
#include "rvcp/rng.hpp"

namespace rvcp {

/// Distribution of per-candidate score variances.
struct GSpec {
  enum class Kind { point, two_point, lognormal, uniform };

  Kind kind = Kind::two_point;
  double a = 0.1;  // point: s; two_point: s1; lognormal: log-mean; uniform: lower
  double b = 4.0;  // two_point: s2; lognormal: log-variance; uniform: upper
  double w = 0.2;  // two_point: P(s1)

  static GSpec point(double s) { return {Kind::point, s, 0.0, 1.0}; }
  static GSpec two_point(double s1, double s2, double w) {
    return {Kind::two_point, s1, s2, w};
  }
  static GSpec lognormal(double m, double v) { return {Kind::lognormal, m, v, 0.0}; }
  static GSpec uniform(double lo, double hi) { return {Kind::uniform, lo, hi, 0.0}; }

  double draw(Engine& eng) const;
};

std::string_view to_string(GSpec::Kind kind);

struct GenerativeSpec {
  double mu = 0.0;
  double tau2 = 1.0;
  GSpec g = GSpec::two_point(0.1, 4.0, 0.2);
  std::size_t n_candidates = 100;
  std::size_t n_samples = 50;
  std::size_t n_cal = 500;
  std::size_t n_test = 500;
  RngSpec rng;
};

/// Throws InvalidArgument on negative variances, w outside [0,1], K < 2, M < 1.
void validate(const GenerativeSpec& spec);

struct LatentRecord {
  std::vector<double> theta;   // item-major, per candidate
  std::vector<double> sigma2;
};

struct SimulatedData {
  ScoreTensor cal;
  ScoreTensor test;
  LatentRecord cal_latent;
  LatentRecord test_latent;
};

/// theta ~ N(mu, tau2) and sigma2 ~ g per candidate, then M scores from
/// N(theta, sigma2); the true label is the argmax of theta (lowest index on
/// ties). Logit-kind tensors; calibration items are drawn first.
SimulatedData generate(const GenerativeSpec& spec);

struct ToyProbability {
  double analytic = 0.0;       // Phi(-1 / sqrt(1001))
  double monte_carlo = 0.0;
  double mc_standard_error = 0.0;
  std::size_t draws = 0;
  double reported = 0.4847;    // value quoted for this example in the literature
};

/// P(q > p) for p ~ N(1, 1), q ~ N(0, 1000).
ToyProbability toy_variance_probability(std::size_t draws = 10'000'000,
                                        RngSpec rng = {});

/// P(f > T) for a false label f ~ N(mu0, sigma2) against a frozen score
/// threshold T (standard CP or CP_avg).
double inclusion_probability_std(double mu0, double sigma2, double score_threshold);

/// P(f >= t_{r*}(sigma2)) for the r-value threshold family at level r_star.
double inclusion_probability_r(double mu0, double sigma2, double r_star,
                               const EBModel& model);

/// Dispatches on the predictor's method; cp and cp_avg use the raw-score
/// threshold implied by the nonconformity threshold.
double inclusion_probability(const CalibratedPredictor& pred, double mu0,
                             double sigma2);

/// Spearman correlation with average ranks for ties.
double spearman(std::span<const double> a, std::span<const double> b);

// Experiments ---------------------------------------------------------------

enum class ExperimentName {
  coverage_sweep,
  setsize_vs_avg,
  setsize_vs_std,
  instability_demo,
  zero_variance_reduction,
  asymptotic_rejection,
};

std::string_view to_string(ExperimentName name);
ExperimentName parse_experiment(std::string_view text);

/// Conformal methods compared in every trial.
struct MethodSpec {
  std::string label;
  CalibrationConfig config;  // alpha is overwritten per run
};

/// cp (sample 0), cp_avg, cp_rvalue parametric, cp_rvalue nonparametric.
std::vector<MethodSpec> default_methods(VarianceMode mode = VarianceMode::standard_error);

struct MethodSummary {
  std::string label;
  double coverage_mean = 0.0;
  double coverage_se = 0.0;
  double size_mean = 0.0;
  double size_se = 0.0;
  double true_index_mean = 0.0;  // mean over trials of covered-item averages
  std::size_t empty_sets = 0;
};

struct PairedDifference {
  std::string a;
  std::string b;
  double mean = 0.0;  // mean over trials of (mean |C_a| - mean |C_b|)
  double se = 0.0;
  std::size_t n = 0;
};

struct AlphaResult {
  double alpha = 0.0;
  std::vector<MethodSummary> methods;
  std::vector<PairedDifference> differences;
};

struct ExperimentResult {
  std::string name;
  GenerativeSpec spec;
  std::size_t n_trials = 0;
  std::vector<AlphaResult> alphas;
  std::map<std::string, double> extras;

  const MethodSummary& method(double alpha, std::string_view label) const;
  const PairedDifference& difference(double alpha, std::string_view a,
                                     std::string_view b) const;
};

/// Per-trial coverage and size for each method at each alpha.
struct TrialOutcome {
  // [alpha][method]
  std::vector<std::vector<EvalReport>> reports;
};

/// One calibrate/predict/evaluate cycle on freshly simulated data.
TrialOutcome run_trial(const GenerativeSpec& spec, std::span<const double> alphas,
                       std::span<const MethodSpec> methods);

/// Same cycle on given tensors.
TrialOutcome run_trial(const ScoreTensor& cal, const ScoreTensor& test,
                       std::span<const double> alphas,
                       std::span<const MethodSpec> methods);

/// Generative settings for trial t: seed spec.rng.seed + t.
GenerativeSpec trial_spec(const GenerativeSpec& spec, std::size_t trial);

/// run_trial over n_trials fresh draws, trials spread over worker threads.
std::vector<TrialOutcome> run_trials(const GenerativeSpec& spec,
                                     std::span<const double> alphas,
                                     std::span<const MethodSpec> methods,
                                     std::size_t n_trials);

/// Aggregates per-trial outcomes; differences pair every cp_rvalue method
/// against cp and cp_avg.
std::vector<AlphaResult> summarise(std::span<const TrialOutcome> trials,
                                   std::span<const double> alphas,
                                   std::span<const MethodSpec> methods);

/// Trial t draws from seed spec.rng.seed + t. mode sets the variance mode of
/// the compared methods in the coverage and set-size experiments.
ExperimentResult run_experiment(ExperimentName name, const GenerativeSpec& spec,
                                std::vector<double> alphas, std::size_t n_trials,
                                VarianceMode mode = VarianceMode::standard_error);

}  // namespace rvcp
