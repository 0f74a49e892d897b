#include "rvcp/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <iomanip>
#include <numeric>
#include <optional>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "rvcp/conformal.hpp"
#include "rvcp/error.hpp"
#include "rvcp/io.hpp"
#include "rvcp/parallel.hpp"
#include "rvcp/simulator.hpp"

namespace rvcp {
namespace {

using io::json;

struct CalibrateArgs {
  std::optional<std::string> method, estimator, variance_mode;
  std::optional<double> alpha;
  std::optional<std::size_t> grid_size, sample_index, max_g_nodes;
  std::optional<bool> refine;
  std::string config_path, cal_path, out_path;
};

struct CompareArgs {
  std::string cal_path, test_path, spec_path, out_path, variance_mode = "standard-error";
  std::vector<double> alphas;
  std::size_t trials = 100;
  std::optional<std::uint64_t> seed;
};

std::string fixed(double x, int digits = 4) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << x;
  return s.str();
}

// Flag > config file > built-in default.
CalibrationConfig effective_config(const CalibrateArgs& a) {
  CalibrationConfig c;
  if (!a.config_path.empty()) {
    const json j = io::read_json_file(a.config_path);
    c = io::config_from_json(j.contains("config") ? j["config"] : j, c);
  }
  if (a.method) c.method = parse_method(*a.method);
  if (a.alpha) c.alpha = *a.alpha;
  if (a.estimator) c.estimator = parse_estimator(*a.estimator);
  if (a.variance_mode) c.variance_mode = parse_variance_mode(*a.variance_mode);
  if (a.grid_size) c.grid_size = *a.grid_size;
  if (a.sample_index) c.sample_index = *a.sample_index;
  if (a.max_g_nodes) c.max_g_nodes = *a.max_g_nodes;
  if (a.refine) c.refine = *a.refine;
  return c;
}

void print_report(std::ostream& out, const EvalReport& r) {
  out << "items           " << r.n_items << '\n'
      << "coverage        " << fixed(r.coverage) << '\n'
      << "mean set size   " << fixed(r.mean_size, 3) << " (sd " << fixed(r.sd_size, 3)
      << ")\n"
      << "mean true index "
      << (r.mean_true_index ? fixed(*r.mean_true_index, 3) : std::string("n/a")) << '\n'
      << "empty sets      " << r.empty_sets << '\n';
}

void print_comparison(std::ostream& out, const std::vector<AlphaResult>& results,
                      std::size_t n_trials) {
  for (const auto& a : results) {
    out << "alpha = " << a.alpha << ", " << n_trials << " trials\n";
    out << std::left << std::setw(20) << "method" << std::right << std::setw(10)
        << "coverage" << std::setw(9) << "se" << std::setw(11) << "mean |C|" << std::setw(9)
        << "se" << std::setw(12) << "true index" << '\n';
    for (const auto& m : a.methods) {
      out << std::left << std::setw(20) << m.label << std::right << std::setw(10)
          << fixed(m.coverage_mean) << std::setw(9) << fixed(m.coverage_se)
          << std::setw(11) << fixed(m.size_mean, 3) << std::setw(9) << fixed(m.size_se, 3)
          << std::setw(12) << fixed(m.true_index_mean, 3) << '\n';
    }
    out << "paired differences in mean |C|\n";
    for (const auto& d : a.differences) {
      out << "  " << std::left << std::setw(36) << (d.a + " - " + d.b) << std::right
          << std::setw(10) << fixed(d.mean, 3) << "  se " << fixed(d.se, 3) << '\n';
    }
  }
}

int cmd_simulate(const std::string& spec_path, std::uint64_t seed,
                 const std::string& out_cal, const std::string& out_test,
                 std::ostream& out) {
  GenerativeSpec spec;
  if (!spec_path.empty()) spec = io::spec_from_json(io::read_json_file(spec_path));
  spec.rng = RngSpec{seed, 0};
  const auto data = generate(spec);
  io::save_tensor(data.cal, out_cal);
  io::save_tensor(data.test, out_test);
  out << "wrote " << data.cal.n_items() << " calibration and " << data.test.n_items()
      << " test items (K=" << spec.n_candidates << ", M=" << spec.n_samples
      << ", seed=" << seed << ")\n";
  return 0;
}

int cmd_calibrate(const CalibrateArgs& a, std::ostream& out) {
  const CalibrationConfig config = effective_config(a);
  const auto cal = io::load_tensor(a.cal_path);
  const auto pred = calibrate(cal, config);
  io::save_predictor(pred, a.out_path);
  out << "calibrated " << to_string(pred.method()) << " on " << pred.n_cal
      << " items: threshold " << io::format_double(pred.threshold) << " (rank "
      << pred.rank << ")\n";
  return 0;
}

int cmd_predict(const std::string& pred_path, const std::string& test_path,
                const std::string& out_path, std::ostream& out) {
  const auto pred = io::load_predictor(pred_path);
  const auto test = io::load_tensor(test_path);
  const auto sets = predict(pred, test);
  io::save_sets(pred, sets, out_path);
  std::size_t total = 0;
  for (const auto& s : sets) total += s.members.size();
  out << "predicted " << sets.size() << " sets, mean size "
      << fixed(sets.empty() ? 0.0 : static_cast<double>(total) / sets.size(), 3) << '\n';
  return 0;
}

int cmd_evaluate(const std::string& sets_path, const std::string& truth_path,
                 const std::string& out_path, std::ostream& out) {
  const auto sets = io::load_sets(sets_path);
  const auto truth = io::load_tensor(truth_path);
  const auto report = evaluate(sets.sets, truth);
  json j = {{"kind", "evaluation"},
            {"version", io::kFormatVersion},
            {"sets_header", sets.header},
            {"report", io::report_to_json(report)}};
  io::write_file_atomic(out_path, j.dump(1) + "\n");
  print_report(out, report);
  return 0;
}

int cmd_compare(const CompareArgs& a, std::ostream& out) {
  if (!a.seed) throw Error(ErrorKind::invalid_argument, "compare requires --seed");
  const bool from_files = !a.cal_path.empty() || !a.test_path.empty();
  if (from_files && (a.cal_path.empty() || a.test_path.empty())) {
    throw Error(ErrorKind::invalid_argument, "compare needs both --cal and --test");
  }
  if (from_files && !a.spec_path.empty()) {
    throw Error(ErrorKind::invalid_argument, "use either --cal/--test or --spec");
  }
  if (a.trials == 0) throw Error(ErrorKind::invalid_argument, "--trials must be >= 1");
  std::vector<double> alphas = a.alphas.empty() ? std::vector<double>{0.1} : a.alphas;
  const VarianceMode mode = parse_variance_mode(a.variance_mode);
  const auto methods = default_methods(mode);

  json j;
  std::vector<AlphaResult> results;
  if (from_files) {
    // Each trial re-splits the pooled items at random, keeping the file sizes.
    const auto cal = io::load_tensor(a.cal_path);
    const auto test = io::load_tensor(a.test_path);
    const auto pooled = ScoreTensor::concat(cal, test);
    std::vector<TrialOutcome> trials(a.trials);
    parallel_for(a.trials, [&](std::size_t t) {
      std::vector<std::size_t> order(pooled.n_items());
      std::iota(order.begin(), order.end(), std::size_t{0});
      auto eng = make_engine(RngSpec{*a.seed, t});
      std::shuffle(order.begin(), order.end(), eng);
      const std::span<const std::size_t> all(order);
      trials[t] = run_trial(pooled.select(all.first(cal.n_items())),
                            pooled.select(all.subspan(cal.n_items())), alphas, methods);
    });
    results = summarise(trials, alphas, methods);
    ExperimentResult r;
    r.name = "compare";
    r.n_trials = a.trials;
    r.alphas = results;
    j = io::experiment_to_json(r);
    j["spec"] = nullptr;
    j["inputs"] = {{"cal", a.cal_path}, {"test", a.test_path}};
  } else {
    GenerativeSpec spec;
    if (!a.spec_path.empty()) spec = io::spec_from_json(io::read_json_file(a.spec_path));
    spec.rng = RngSpec{*a.seed, 0};
    auto r = run_experiment(ExperimentName::coverage_sweep, spec, alphas, a.trials, mode);
    r.name = "compare";
    results = r.alphas;
    j = io::experiment_to_json(r);
  }
  j["seed"] = *a.seed;
  json cfg = json::array();
  for (const auto& m : methods) {
    cfg.push_back({{"label", m.label}, {"config", io::config_to_json(m.config)}});
  }
  j["methods"] = cfg;
  print_comparison(out, results, a.trials);
  if (!a.out_path.empty()) io::write_file_atomic(a.out_path, j.dump(1) + "\n");
  return 0;
}

int cmd_experiment(const std::string& name, const std::string& spec_path,
                   std::vector<double> alphas, std::size_t trials, std::uint64_t seed,
                   const std::string& out_path, std::ostream& out) {
  GenerativeSpec spec;
  if (!spec_path.empty()) spec = io::spec_from_json(io::read_json_file(spec_path));
  spec.rng = RngSpec{seed, 0};
  const auto r = run_experiment(parse_experiment(name), spec, std::move(alphas), trials);
  if (!r.alphas.empty()) print_comparison(out, r.alphas, r.n_trials);
  for (const auto& [k, v] : r.extras) out << k << " = " << v << '\n';
  json j = io::experiment_to_json(r);
  j["seed"] = seed;
  if (!out_path.empty()) io::write_file_atomic(out_path, j.dump(1) + "\n");
  return 0;
}

int cmd_toy(std::size_t draws, std::uint64_t seed, const std::string& out_path,
            std::ostream& out) {
  const auto toy = toy_variance_probability(draws, RngSpec{seed, 0});
  out << "P(q > p), p ~ N(1,1), q ~ N(0,1000)\n"
      << "analytic     " << fixed(toy.analytic, 6) << '\n'
      << "monte carlo  " << fixed(toy.monte_carlo, 6) << " (se "
      << fixed(toy.mc_standard_error, 6) << ", " << toy.draws << " draws)\n"
      << "reported     " << fixed(toy.reported, 4)
      << " (differs from the analytic value by "
      << fixed(toy.analytic - toy.reported, 4) << ")\n";
  if (!out_path.empty()) {
    json j = {{"analytic", toy.analytic},
              {"monte_carlo", toy.monte_carlo},
              {"mc_standard_error", toy.mc_standard_error},
              {"draws", toy.draws},
              {"reported", toy.reported},
              {"seed", seed}};
    io::write_file_atomic(out_path, j.dump(1) + "\n");
  }
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Conformal prediction sets ranked by empirical-Bayes r-values", "rvcp"};
  app.require_subcommand(1);

  std::string spec_path, out_cal, out_test, out_path, cal_path, test_path, pred_path,
      sets_path, truth_path, exp_name;
  std::uint64_t seed = 0;
  std::size_t trials = 100, draws = 10'000'000;
  std::vector<double> alphas;

  auto* sim = app.add_subcommand("simulate", "Write calibration and test tensors");
  sim->add_option("--spec", spec_path, "Generative spec (JSON)")->check(CLI::ExistingFile);
  sim->add_option("--out-cal", out_cal)->required();
  sim->add_option("--out-test", out_test)->required();
  sim->add_option("--seed", seed)->required();

  CalibrateArgs ca;
  auto* cal = app.add_subcommand("calibrate", "Fit a predictor on a calibration tensor");
  cal->add_option("--method", ca.method, "cp, cp-avg or cp-rvalue");
  cal->add_option("--alpha", ca.alpha);
  cal->add_option("--estimator", ca.estimator, "parametric or nonparametric");
  cal->add_option("--variance-mode", ca.variance_mode, "raw, standard-error or zero");
  cal->add_option("--grid-size", ca.grid_size);
  cal->add_option("--sample-index", ca.sample_index, "Sample scored by cp");
  cal->add_option("--max-g-nodes", ca.max_g_nodes);
  cal->add_option("--refine", ca.refine);
  cal->add_option("--config", ca.config_path)->check(CLI::ExistingFile);
  cal->add_option("--cal", ca.cal_path)->required();
  cal->add_option("--out", ca.out_path)->required();

  auto* pre = app.add_subcommand("predict", "Write prediction sets for a test tensor");
  pre->add_option("--predictor", pred_path)->required();
  pre->add_option("--test", test_path)->required();
  pre->add_option("--out", out_path)->required();

  auto* ev = app.add_subcommand("evaluate", "Coverage and set-size report");
  ev->add_option("--sets", sets_path)->required();
  ev->add_option("--truth", truth_path)->required();
  ev->add_option("--out", out_path)->required();

  CompareArgs co;
  auto* cmp = app.add_subcommand("compare", "Repeated-split comparison of all methods");
  cmp->add_option("--cal", co.cal_path);
  cmp->add_option("--test", co.test_path);
  cmp->add_option("--spec", co.spec_path)->check(CLI::ExistingFile);
  cmp->add_option("--alpha", co.alphas)->delimiter(',');
  cmp->add_option("--trials", co.trials);
  cmp->add_option("--seed", co.seed);
  cmp->add_option("--variance-mode", co.variance_mode);
  cmp->add_option("--out", co.out_path);

  auto* exp = app.add_subcommand("experiment", "Run a named simulation experiment");
  exp->add_option("--name", exp_name)->required();
  exp->add_option("--spec", spec_path)->check(CLI::ExistingFile);
  exp->add_option("--alpha", alphas)->delimiter(',');
  exp->add_option("--trials", trials);
  exp->add_option("--seed", seed)->required();
  exp->add_option("--out", out_path);

  auto* toy = app.add_subcommand("toy", "Two-score variance example");
  toy->add_option("--draws", draws);
  toy->add_option("--seed", seed)->required();
  toy->add_option("--out", out_path);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*sim) return cmd_simulate(spec_path, seed, out_cal, out_test, out);
    if (*cal) return cmd_calibrate(ca, out);
    if (*pre) return cmd_predict(pred_path, test_path, out_path, out);
    if (*ev) return cmd_evaluate(sets_path, truth_path, out_path, out);
    if (*cmp) return cmd_compare(co, out);
    if (*exp) return cmd_experiment(exp_name, spec_path, alphas, trials, seed, out_path, out);
    if (*toy) return cmd_toy(draws, seed, out_path, out);
  } catch (const Error& e) {
    err << "rvcp: " << to_string(e.kind()) << ": " << e.what() << '\n';
    return is_statistical(e.kind()) ? 3 : 2;
  } catch (const std::exception& e) {
    err << "rvcp: error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

}  // namespace rvcp
