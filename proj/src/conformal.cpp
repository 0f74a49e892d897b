#include "rvcp/conformal.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <unordered_map>

#include "rvcp/error.hpp"
#include "rvcp/parallel.hpp"

namespace rvcp {

std::string_view to_string(Method m) {
  switch (m) {
    case Method::cp: return "cp";
    case Method::cp_avg: return "cp-avg";
    case Method::cp_rvalue: return "cp-rvalue";
  }
  return "cp";
}

Method parse_method(std::string_view text) {
  if (text == "cp") return Method::cp;
  if (text == "cp-avg" || text == "cp_avg") return Method::cp_avg;
  if (text == "cp-rvalue" || text == "cp_rvalue") return Method::cp_rvalue;
  throw Error(ErrorKind::invalid_argument, "unknown method '" + std::string(text) + "'");
}

std::size_t conformal_rank(std::size_t n, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw Error(ErrorKind::domain_error,
                "alpha must lie in (0,1), got " + std::to_string(alpha));
  }
  // The guard absorbs representation error in products such as 20 * 0.95.
  const double x = static_cast<double>(n + 1) * (1.0 - alpha);
  return static_cast<std::size_t>(std::ceil(x - 1e-9));
}

double order_statistic(std::vector<double> scores, std::size_t rank) {
  if (rank == 0 || rank > scores.size()) {
    throw Error(ErrorKind::insufficient_calibration,
                "order statistic rank " + std::to_string(rank) + " outside [1, " +
                    std::to_string(scores.size()) + "]");
  }
  auto nth = scores.begin() + static_cast<std::ptrdiff_t>(rank - 1);
  std::nth_element(scores.begin(), nth, scores.end());
  return *nth;
}

namespace {

double point_score(ScoreKind kind, double value) {
  return kind == ScoreKind::probability ? 1.0 - value : -value;
}

void check_compatible(const ScoringModel& model, const ScoreTensor& t) {
  if (t.n_candidates() != model.n_candidates) {
    throw Error(ErrorKind::shape_mismatch,
                "tensor has K=" + std::to_string(t.n_candidates()) +
                    ", predictor was calibrated with K=" +
                    std::to_string(model.n_candidates));
  }
  if (t.kind() != model.kind) {
    throw Error(ErrorKind::shape_mismatch,
                "tensor score_kind " + std::string(to_string(t.kind())) +
                    " differs from calibration kind " +
                    std::string(to_string(model.kind)));
  }
  if (model.config.method == Method::cp &&
      model.config.sample_index >= t.n_samples()) {
    throw Error(ErrorKind::missing_sample,
                "cp sample_index " + std::to_string(model.config.sample_index) +
                    " but tensor has M=" + std::to_string(t.n_samples()));
  }
}

}  // namespace

ScoringModel fit_scoring(const ScoreTensor& cal, const CalibrationConfig& config) {
  ScoringModel model;
  model.config = config;
  model.n_candidates = cal.n_candidates();
  model.kind = cal.kind();
  check_compatible(model, cal);
  if (config.method != Method::cp_rvalue) return model;

  if (config.estimator == Estimator::parametric) {
    const auto stats = candidate_stats(cal, config.variance_mode);
    const bool zero = config.variance_mode == VarianceMode::zero;
    const EBModel eb = fit_eb(stats.values, !zero, config.max_g_nodes);
    model.table = zero ? build_zero_variance_table(eb, config.grid_size)
                       : build_threshold_table(eb, config.grid_size);
  } else {
    model.lambda = fit_lambda(rank_profiles(cal));
  }
  return model;
}

std::vector<double> nonconformity(const ScoringModel& model, const ScoreTensor& t) {
  check_compatible(model, t);
  const std::size_t k = t.n_candidates();
  std::vector<double> out(t.n_items() * k);

  switch (model.config.method) {
    case Method::cp: {
      const std::size_t s = model.config.sample_index;
      for (std::size_t i = 0; i < t.n_items(); ++i) {
        for (std::size_t c = 0; c < k; ++c) {
          out[i * k + c] = point_score(t.kind(), t.at(i, c, s));
        }
      }
      break;
    }
    case Method::cp_avg: {
      // Average the raw scores, then map to the nonconformity scale.
      const auto stats = candidate_stats(t, VarianceMode::raw);
      for (std::size_t j = 0; j < out.size(); ++j) {
        out[j] = point_score(t.kind(), stats.values[j].mean);
      }
      break;
    }
    case Method::cp_rvalue: {
      if (model.config.estimator == Estimator::parametric) {
        const auto stats = candidate_stats(t, model.config.variance_mode);
        out = r_parametric(t, stats, *model.table, model.config.refine).values;
      } else {
        const auto profiles = rank_profiles(t);
        out = r_nonparametric(t, profiles, *model.lambda, model.config.refine).values;
      }
      break;
    }
  }
  return out;
}

std::vector<double> nonconformity(const ScoringModel& model, const ScoreTensor& t,
                                  std::size_t item) {
  const std::size_t idx[] = {item};
  return nonconformity(model, t.select(idx));
}

namespace {

std::size_t feasible_rank(std::size_t n, double alpha) {
  const std::size_t rank = conformal_rank(n, alpha);
  if (rank > n) {
    throw Error(ErrorKind::insufficient_calibration,
                "calibration needs rank ceil((n+1)(1-alpha)) = ceil(" +
                    std::to_string(n + 1) + " * " + std::to_string(1.0 - alpha) +
                    ") = " + std::to_string(rank) + " <= n = " + std::to_string(n));
  }
  return rank;
}

}  // namespace

CalibratedPredictor calibrate_from_scores(ScoringModel scoring,
                                          const std::vector<double>& true_scores) {
  const std::size_t n = true_scores.size();
  const std::size_t rank = feasible_rank(n, scoring.config.alpha);
  CalibratedPredictor pred;
  pred.scoring = std::move(scoring);
  pred.n_cal = n;
  pred.rank = rank;
  pred.threshold = order_statistic(true_scores, rank);
  return pred;
}

CalibratedPredictor calibrate(const ScoreTensor& cal, const CalibrationConfig& config) {
  if (!cal.fully_labelled()) {
    throw Error(ErrorKind::missing_labels,
                "every calibration item needs a true_label");
  }
  feasible_rank(cal.n_items(), config.alpha);  // before any model fitting
  ScoringModel scoring = fit_scoring(cal, config);
  const auto scores = nonconformity(scoring, cal);
  std::vector<double> true_scores(cal.n_items());
  for (std::size_t i = 0; i < cal.n_items(); ++i) {
    true_scores[i] = scores[i * cal.n_candidates() + *cal.true_label(i)];
  }
  return calibrate_from_scores(std::move(scoring), true_scores);
}

bool PredictionSet::contains(std::uint32_t cand) const {
  return position(cand).has_value();
}

std::optional<std::size_t> PredictionSet::position(std::uint32_t cand) const {
  for (std::size_t j = 0; j < members.size(); ++j) {
    if (members[j].index == cand) return j;
  }
  return std::nullopt;
}

std::vector<PredictionSet> predict_from_scores(const CalibratedPredictor& pred,
                                               const ScoreTensor& test,
                                               const std::vector<double>& scores) {
  const std::size_t k = test.n_candidates();
  std::vector<PredictionSet> sets(test.n_items());
  for (std::size_t i = 0; i < test.n_items(); ++i) {
    PredictionSet& set = sets[i];
    set.item_id = test.item_id(i);
    set.method = pred.method();
    for (std::size_t c = 0; c < k; ++c) {
      const double s = scores[i * k + c];
      if (s < pred.threshold) {
        set.members.push_back({static_cast<std::uint32_t>(c), s});
      }
    }
    std::sort(set.members.begin(), set.members.end(),
              [](const SetMember& a, const SetMember& b) {
                return a.score != b.score ? a.score < b.score : a.index < b.index;
              });
  }
  return sets;
}

std::vector<PredictionSet> predict(const CalibratedPredictor& pred,
                                   const ScoreTensor& test) {
  return predict_from_scores(pred, test, nonconformity(pred.scoring, test));
}

EvalReport evaluate(const std::vector<PredictionSet>& sets, const ScoreTensor& truth) {
  std::unordered_map<std::string, std::size_t> index;
  index.reserve(truth.n_items());
  for (std::size_t i = 0; i < truth.n_items(); ++i) index.emplace(truth.item_id(i), i);

  EvalReport report;
  report.n_items = sets.size();
  report.items.reserve(sets.size());
  double size_sum = 0.0;
  double covered = 0.0;
  double pos_sum = 0.0;
  for (const auto& set : sets) {
    const auto it = index.find(set.item_id);
    const auto label = it == index.end() ? std::nullopt : truth.true_label(it->second);
    if (!label) {
      throw Error(ErrorKind::missing_labels,
                  "no true_label for item '" + set.item_id + "'");
    }
    ItemEvaluation ev;
    ev.item_id = set.item_id;
    ev.size = set.members.size();
    ev.true_index = set.position(*label);
    ev.covered = ev.true_index.has_value();
    size_sum += static_cast<double>(ev.size);
    report.empty_sets += ev.size == 0;
    if (ev.covered) {
      covered += 1.0;
      pos_sum += static_cast<double>(*ev.true_index);
    }
    report.items.push_back(std::move(ev));
  }
  const double n = static_cast<double>(report.n_items);
  if (report.n_items > 0) {
    report.coverage = covered / n;
    report.mean_size = size_sum / n;
    double ss = 0.0;
    for (const auto& ev : report.items) {
      const double d = static_cast<double>(ev.size) - report.mean_size;
      ss += d * d;
    }
    report.sd_size = report.n_items > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  }
  if (covered > 0.0) report.mean_true_index = pos_sum / covered;
  return report;
}

}  // namespace rvcp
