#include "rvcp/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <set>
#include <stdexcept>
#include <string>

#include "rvcp/error.hpp"
#include "rvcp/normal.hpp"
#include "rvcp/parallel.hpp"

namespace rvcp {

std::string_view to_string(GSpec::Kind kind) {
  switch (kind) {
    case GSpec::Kind::point: return "point";
    case GSpec::Kind::two_point: return "two_point";
    case GSpec::Kind::lognormal: return "lognormal";
    case GSpec::Kind::uniform: return "uniform";
  }
  return "point";
}

double GSpec::draw(Engine& eng) const {
  switch (kind) {
    case Kind::point:
      return a;
    case Kind::two_point:
      return std::uniform_real_distribution<double>(0.0, 1.0)(eng) < w ? a : b;
    case Kind::lognormal:
      return std::exp(a + std::sqrt(b) * std::normal_distribution<double>()(eng));
    case Kind::uniform:
      return std::uniform_real_distribution<double>(a, b)(eng);
  }
  return a;
}

void validate(const GenerativeSpec& spec) {
  auto fail = [](const std::string& msg) {
    throw Error(ErrorKind::invalid_argument, "generative spec: " + msg);
  };
  if (!(spec.tau2 >= 0.0) || !std::isfinite(spec.mu)) fail("need finite mu and tau2 >= 0");
  if (spec.n_candidates < 2) fail("K must be >= 2");
  if (spec.n_samples < 1) fail("M must be >= 1");
  const GSpec& g = spec.g;
  switch (g.kind) {
    case GSpec::Kind::point:
      if (!(g.a >= 0.0)) fail("point variance must be >= 0");
      break;
    case GSpec::Kind::two_point:
      if (!(g.a >= 0.0) || !(g.b >= 0.0)) fail("two_point variances must be >= 0");
      if (!(g.w >= 0.0 && g.w <= 1.0)) fail("two_point weight must lie in [0,1]");
      break;
    case GSpec::Kind::lognormal:
      if (!(g.b >= 0.0)) fail("lognormal log-variance must be >= 0");
      break;
    case GSpec::Kind::uniform:
      if (!(g.a >= 0.0) || !(g.b >= g.a)) fail("uniform needs 0 <= a <= b");
      break;
  }
}

namespace {

void fill_items(const GenerativeSpec& spec, std::size_t n_items, const char* prefix,
                Engine& eng, std::vector<std::string>& ids, std::vector<double>& scores,
                std::vector<std::optional<std::uint32_t>>& labels, LatentRecord& latent) {
  const std::size_t k = spec.n_candidates;
  const std::size_t m = spec.n_samples;
  const double tau = std::sqrt(spec.tau2);
  std::normal_distribution<double> std_normal;

  ids.reserve(n_items);
  scores.resize(n_items * k * m);
  labels.resize(n_items);
  latent.theta.resize(n_items * k);
  latent.sigma2.resize(n_items * k);
  char buf[32];
  for (std::size_t i = 0; i < n_items; ++i) {
    std::snprintf(buf, sizeof buf, "%s%06zu", prefix, i);
    ids.emplace_back(buf);
    std::size_t best = 0;
    for (std::size_t c = 0; c < k; ++c) {
      const double theta = spec.mu + tau * std_normal(eng);
      const double s2 = spec.g.draw(eng);
      const double sd = std::sqrt(s2);
      latent.theta[i * k + c] = theta;
      latent.sigma2[i * k + c] = s2;
      double* out = scores.data() + (i * k + c) * m;
      for (std::size_t j = 0; j < m; ++j) out[j] = theta + sd * std_normal(eng);
      if (theta > latent.theta[i * k + best]) best = c;
    }
    labels[i] = static_cast<std::uint32_t>(best);
  }
}

}  // namespace

SimulatedData generate(const GenerativeSpec& spec) {
  validate(spec);
  Engine eng = make_engine(spec.rng);
  SimulatedData out;
  {
    std::vector<std::string> ids;
    std::vector<double> scores;
    std::vector<std::optional<std::uint32_t>> labels;
    fill_items(spec, spec.n_cal, "cal-", eng, ids, scores, labels, out.cal_latent);
    out.cal = ScoreTensor(std::move(ids), spec.n_candidates, spec.n_samples,
                          ScoreKind::logit, std::move(scores), std::move(labels));
  }
  {
    std::vector<std::string> ids;
    std::vector<double> scores;
    std::vector<std::optional<std::uint32_t>> labels;
    fill_items(spec, spec.n_test, "test-", eng, ids, scores, labels, out.test_latent);
    out.test = ScoreTensor(std::move(ids), spec.n_candidates, spec.n_samples,
                           ScoreKind::logit, std::move(scores), std::move(labels));
  }
  return out;
}

ToyProbability toy_variance_probability(std::size_t draws, RngSpec rng) {
  ToyProbability out;
  out.analytic = normal::cdf(-1.0 / std::sqrt(1001.0));
  out.draws = draws;
  Engine eng = make_engine(rng);
  std::normal_distribution<double> z;
  const double q_sd = std::sqrt(1000.0);
  std::size_t hits = 0;
  for (std::size_t d = 0; d < draws; ++d) {
    const double p = 1.0 + z(eng);
    const double q = q_sd * z(eng);
    hits += q > p;
  }
  const double n = static_cast<double>(draws);
  out.monte_carlo = draws > 0 ? static_cast<double>(hits) / n : 0.0;
  out.mc_standard_error =
      draws > 0 ? std::sqrt(out.monte_carlo * (1.0 - out.monte_carlo) / n) : 0.0;
  return out;
}

double inclusion_probability_std(double mu0, double sigma2, double score_threshold) {
  if (!(sigma2 > 0.0)) {
    throw Error(ErrorKind::domain_error, "inclusion probability needs sigma2 > 0");
  }
  return normal::sf((score_threshold - mu0) / std::sqrt(sigma2));
}

double inclusion_probability_r(double mu0, double sigma2, double r_star,
                               const EBModel& model) {
  if (!(sigma2 > 0.0)) {
    throw Error(ErrorKind::domain_error, "inclusion probability needs sigma2 > 0");
  }
  const double t = threshold(r_star, sigma2, model);
  return normal::sf((t - mu0) / std::sqrt(sigma2));
}

double inclusion_probability(const CalibratedPredictor& pred, double mu0,
                             double sigma2) {
  const auto& scoring = pred.scoring;
  switch (pred.method()) {
    case Method::cp:
    case Method::cp_avg: {
      const double t = scoring.kind == ScoreKind::probability ? 1.0 - pred.threshold
                                                              : -pred.threshold;
      return inclusion_probability_std(mu0, sigma2, t);
    }
    case Method::cp_rvalue:
      if (!scoring.table) {
        throw Error(ErrorKind::invalid_argument,
                    "closed-form inclusion probability needs the parametric estimator");
      }
      return inclusion_probability_r(mu0, sigma2, pred.threshold, scoring.table->model);
  }
  return 0.0;
}

namespace {

std::vector<double> average_ranks(std::span<const double> x) {
  const std::size_t n = x.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> ranks(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && x[order[j + 1]] == x[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t q = i; q <= j; ++q) ranks[order[q]] = avg;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

double spearman(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.size() < 2) {
    throw Error(ErrorKind::invalid_argument, "spearman needs two equal-length series");
  }
  const auto ra = average_ranks(a);
  const auto rb = average_ranks(b);
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

// Experiments ---------------------------------------------------------------

std::string_view to_string(ExperimentName name) {
  switch (name) {
    case ExperimentName::coverage_sweep: return "coverage_sweep";
    case ExperimentName::setsize_vs_avg: return "setsize_vs_avg";
    case ExperimentName::setsize_vs_std: return "setsize_vs_std";
    case ExperimentName::instability_demo: return "instability_demo";
    case ExperimentName::zero_variance_reduction: return "zero_variance_reduction";
    case ExperimentName::asymptotic_rejection: return "asymptotic_rejection";
  }
  return "coverage_sweep";
}

ExperimentName parse_experiment(std::string_view text) {
  for (auto n : {ExperimentName::coverage_sweep, ExperimentName::setsize_vs_avg,
                 ExperimentName::setsize_vs_std, ExperimentName::instability_demo,
                 ExperimentName::zero_variance_reduction,
                 ExperimentName::asymptotic_rejection}) {
    if (text == to_string(n)) return n;
  }
  throw Error(ErrorKind::invalid_argument,
              "unknown experiment '" + std::string(text) + "'");
}

std::vector<MethodSpec> default_methods(VarianceMode mode) {
  CalibrationConfig base;
  base.variance_mode = mode;
  std::vector<MethodSpec> out;
  auto add = [&](std::string label, Method m, Estimator e) {
    CalibrationConfig c = base;
    c.method = m;
    c.estimator = e;
    out.push_back({std::move(label), c});
  };
  add("cp", Method::cp, Estimator::parametric);
  add("cp_avg", Method::cp_avg, Estimator::parametric);
  add("cp_rvalue_param", Method::cp_rvalue, Estimator::parametric);
  add("cp_rvalue_nonparam", Method::cp_rvalue, Estimator::nonparametric);
  return out;
}

const MethodSummary& ExperimentResult::method(double alpha, std::string_view label) const {
  for (const auto& a : alphas) {
    if (a.alpha != alpha) continue;
    for (const auto& m : a.methods) {
      if (m.label == label) return m;
    }
  }
  throw std::out_of_range("no summary for method " + std::string(label));
}

const PairedDifference& ExperimentResult::difference(double alpha, std::string_view a,
                                                     std::string_view b) const {
  for (const auto& r : alphas) {
    if (r.alpha != alpha) continue;
    for (const auto& d : r.differences) {
      if (d.a == a && d.b == b) return d;
    }
  }
  throw std::out_of_range("no paired difference " + std::string(a) + " - " +
                          std::string(b));
}

TrialOutcome run_trial(const ScoreTensor& cal, const ScoreTensor& test,
                       std::span<const double> alphas,
                       std::span<const MethodSpec> methods) {
  TrialOutcome out;
  out.reports.assign(alphas.size(), std::vector<EvalReport>(methods.size()));
  const std::size_t k = cal.n_candidates();
  for (std::size_t mi = 0; mi < methods.size(); ++mi) {
    const ScoringModel scoring = fit_scoring(cal, methods[mi].config);
    const auto cal_scores = nonconformity(scoring, cal);
    const auto test_scores = nonconformity(scoring, test);
    std::vector<double> true_scores(cal.n_items());
    for (std::size_t i = 0; i < cal.n_items(); ++i) {
      true_scores[i] = cal_scores[i * k + *cal.true_label(i)];
    }
    for (std::size_t ai = 0; ai < alphas.size(); ++ai) {
      ScoringModel s = scoring;
      s.config.alpha = alphas[ai];
      const auto pred = calibrate_from_scores(std::move(s), true_scores);
      const auto sets = predict_from_scores(pred, test, test_scores);
      out.reports[ai][mi] = evaluate(sets, test);
      out.reports[ai][mi].items.clear();
    }
  }
  return out;
}

TrialOutcome run_trial(const GenerativeSpec& spec, std::span<const double> alphas,
                       std::span<const MethodSpec> methods) {
  const auto data = generate(spec);
  return run_trial(data.cal, data.test, alphas, methods);
}

namespace {

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};

MeanSe mean_se(const std::vector<double>& xs) {
  MeanSe r;
  if (xs.empty()) return r;
  const double n = static_cast<double>(xs.size());
  for (double x : xs) r.mean += x;
  r.mean /= n;
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - r.mean) * (x - r.mean);
    r.se = std::sqrt(ss / (n - 1.0) / n);
  }
  return r;
}

}  // namespace

std::vector<AlphaResult> summarise(std::span<const TrialOutcome> trials,
                                   std::span<const double> alphas,
                                   std::span<const MethodSpec> methods) {
  std::vector<AlphaResult> out;
  for (std::size_t ai = 0; ai < alphas.size(); ++ai) {
    AlphaResult ar;
    ar.alpha = alphas[ai];
    for (std::size_t mi = 0; mi < methods.size(); ++mi) {
      std::vector<double> cov, size, idx;
      MethodSummary s;
      s.label = methods[mi].label;
      for (const auto& t : trials) {
        const auto& r = t.reports[ai][mi];
        cov.push_back(r.coverage);
        size.push_back(r.mean_size);
        if (r.mean_true_index) idx.push_back(*r.mean_true_index);
        s.empty_sets += r.empty_sets;
      }
      const auto c = mean_se(cov);
      const auto z = mean_se(size);
      s.coverage_mean = c.mean;
      s.coverage_se = c.se;
      s.size_mean = z.mean;
      s.size_se = z.se;
      s.true_index_mean = mean_se(idx).mean;
      ar.methods.push_back(std::move(s));
    }
    for (std::size_t a = 0; a < methods.size(); ++a) {
      if (methods[a].config.method != Method::cp_rvalue) continue;
      for (std::size_t b = 0; b < methods.size(); ++b) {
        if (methods[b].config.method == Method::cp_rvalue) continue;
        std::vector<double> diff;
        for (const auto& t : trials) {
          diff.push_back(t.reports[ai][a].mean_size - t.reports[ai][b].mean_size);
        }
        const auto d = mean_se(diff);
        ar.differences.push_back({methods[a].label, methods[b].label, d.mean, d.se,
                                  diff.size()});
      }
    }
    out.push_back(std::move(ar));
  }
  return out;
}

GenerativeSpec trial_spec(const GenerativeSpec& spec, std::size_t trial) {
  GenerativeSpec s = spec;
  s.rng.seed = spec.rng.seed + trial;
  return s;
}

std::vector<TrialOutcome> run_trials(const GenerativeSpec& spec,
                                     std::span<const double> alphas,
                                     std::span<const MethodSpec> methods,
                                     std::size_t n_trials) {
  std::vector<TrialOutcome> trials(n_trials);
  parallel_for(n_trials, [&](std::size_t t) {
    trials[t] = run_trial(trial_spec(spec, t), alphas, methods);
  });
  return trials;
}

namespace {

std::vector<std::uint32_t> member_indices(const PredictionSet& set) {
  std::vector<std::uint32_t> idx;
  for (const auto& m : set.members) idx.push_back(m.index);
  std::sort(idx.begin(), idx.end());
  return idx;
}

// Share of test candidates whose standardized variance clears s_conj at the
// calibrated r-value level.
double fraction_above_s_conj(const SimulatedData& data, std::span<const double> alphas) {
  CalibrationConfig cfg;
  cfg.method = Method::cp_rvalue;
  cfg.alpha = alphas.front();
  const auto pred = calibrate(data.cal, cfg);
  const auto& model = pred.scoring.table->model;
  const double beta = std::min(pred.threshold, 1.0 - 1e-12);
  const double theta = theta_quantile_std(beta);
  const auto cv = conjugate_variance(theta, solve_z_beta(beta, model));
  if (std::isnan(cv.s_conj)) return 0.0;
  const auto stats = candidate_stats(data.test, cfg.variance_mode);
  std::size_t above = 0;
  for (const auto& st : stats.values) above += st.obs_var / model.tau2 >= cv.s_conj;
  return static_cast<double>(above) / static_cast<double>(stats.values.size());
}

}  // namespace

ExperimentResult run_experiment(ExperimentName name, const GenerativeSpec& spec,
                                std::vector<double> alphas, std::size_t n_trials,
                                VarianceMode mode) {
  validate(spec);
  if (n_trials == 0) throw Error(ErrorKind::invalid_argument, "n_trials must be >= 1");
  if (alphas.empty()) {
    alphas = name == ExperimentName::coverage_sweep ? std::vector<double>{0.05, 0.1, 0.2}
                                                    : std::vector<double>{0.1};
  }
  ExperimentResult result;
  result.name = std::string(to_string(name));
  result.spec = spec;
  result.n_trials = n_trials;

  switch (name) {
    case ExperimentName::coverage_sweep:
    case ExperimentName::setsize_vs_avg:
    case ExperimentName::setsize_vs_std: {
      const auto methods = default_methods(mode);
      const auto trials = run_trials(spec, alphas, methods, n_trials);
      result.alphas = summarise(trials, alphas, methods);
      if (name != ExperimentName::coverage_sweep) {
        result.extras["fraction_above_s_conj"] =
            fraction_above_s_conj(generate(trial_spec(spec, 0)), alphas);
      }
      break;
    }
    case ExperimentName::instability_demo: {
      std::vector<double> unstable(n_trials), distinct(n_trials), max_distinct(n_trials);
      parallel_for(n_trials, [&](std::size_t t) {
        const auto data = generate(trial_spec(spec, t));
        const std::size_t n_test = data.test.n_items();
        std::vector<std::set<std::vector<std::uint32_t>>> seen(n_test);
        for (std::size_t m = 0; m < spec.n_samples; ++m) {
          CalibrationConfig cfg;
          cfg.method = Method::cp;
          cfg.alpha = alphas.front();
          cfg.sample_index = m;
          const auto sets = predict(calibrate(data.cal, cfg), data.test);
          for (std::size_t i = 0; i < n_test; ++i) seen[i].insert(member_indices(sets[i]));
        }
        std::size_t n_unstable = 0, total = 0, mx = 0;
        for (const auto& s : seen) {
          n_unstable += s.size() > 1;
          total += s.size();
          mx = std::max(mx, s.size());
        }
        unstable[t] = static_cast<double>(n_unstable) / static_cast<double>(n_test);
        distinct[t] = static_cast<double>(total) / static_cast<double>(n_test);
        max_distinct[t] = static_cast<double>(mx);
      });
      result.extras["unstable_item_fraction"] = mean_se(unstable).mean;
      result.extras["mean_distinct_sets"] = mean_se(distinct).mean;
      result.extras["max_distinct_sets"] =
          *std::max_element(max_distinct.begin(), max_distinct.end());
      break;
    }
    case ExperimentName::zero_variance_reduction: {
      std::vector<MethodSpec> methods;
      for (auto& m : default_methods(VarianceMode::zero)) {
        if (m.label == "cp_avg" || m.label == "cp_rvalue_param") methods.push_back(m);
      }
      std::vector<double> identical(n_trials * alphas.size());
      std::vector<TrialOutcome> trials(n_trials);
      parallel_for(n_trials, [&](std::size_t t) {
        const auto data = generate(trial_spec(spec, t));
        trials[t] = run_trial(data.cal, data.test, alphas, methods);
        for (std::size_t ai = 0; ai < alphas.size(); ++ai) {
          std::vector<std::vector<PredictionSet>> sets;
          for (const auto& m : methods) {
            CalibrationConfig cfg = m.config;
            cfg.alpha = alphas[ai];
            sets.push_back(predict(calibrate(data.cal, cfg), data.test));
          }
          std::size_t same = 0;
          for (std::size_t i = 0; i < data.test.n_items(); ++i) {
            same += member_indices(sets[0][i]) == member_indices(sets[1][i]);
          }
          identical[t * alphas.size() + ai] =
              static_cast<double>(same) / static_cast<double>(data.test.n_items());
        }
      });
      result.alphas = summarise(trials, alphas, methods);
      result.extras["identical_set_fraction"] = mean_se(identical).mean;
      result.extras["min_identical_set_fraction"] =
          *std::min_element(identical.begin(), identical.end());
      break;
    }
    case ExperimentName::asymptotic_rejection: {
      const auto data = generate(trial_spec(spec, 0));
      CalibrationConfig std_cfg;
      std_cfg.method = Method::cp;
      std_cfg.alpha = alphas.front();
      CalibrationConfig r_cfg;
      r_cfg.method = Method::cp_rvalue;
      r_cfg.alpha = alphas.front();
      const auto p_std = calibrate(data.cal, std_cfg);
      const auto p_r = calibrate(data.cal, r_cfg);
      result.extras["r_star"] = p_r.threshold;
      result.extras["T_std"] = -p_std.threshold;
      const double mu0 = 0.0;
      for (double sigma : {1.0, 10.0, 100.0, 1000.0}) {
        const std::string tag = std::to_string(static_cast<int>(sigma));
        result.extras["std_sigma_" + tag] = inclusion_probability(p_std, mu0, sigma * sigma);
        result.extras["r_sigma_" + tag] = inclusion_probability(p_r, mu0, sigma * sigma);
      }
      break;
    }
  }
  return result;
}

}  // namespace rvcp
