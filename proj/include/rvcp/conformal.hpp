#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "rvcp/core_types.hpp"
#include "rvcp/eb_normal.hpp"
#include "rvcp/rvalue.hpp"

namespace rvcp {

enum class Method { cp, cp_avg, cp_rvalue };

std::string_view to_string(Method m);
Method parse_method(std::string_view text);

struct CalibrationConfig {
  Method method = Method::cp_rvalue;
  double alpha = 0.1;
  Estimator estimator = Estimator::parametric;
  VarianceMode variance_mode = VarianceMode::standard_error;
  std::size_t grid_size = kDefaultGridSize;
  bool refine = true;
  std::size_t sample_index = 0;  // cp only
  std::size_t max_g_nodes = kDefaultMaxGNodes;
};

/// Everything needed to turn a tensor into nonconformity scores; fitted on
/// calibration data and frozen before any test item is scored.
struct ScoringModel {
  CalibrationConfig config;
  std::size_t n_candidates = 0;
  ScoreKind kind = ScoreKind::logit;
  std::optional<ThresholdTable> table;  // cp_rvalue, parametric
  std::optional<LambdaTable> lambda;    // cp_rvalue, nonparametric
};

struct CalibratedPredictor {
  ScoringModel scoring;
  double threshold = 0.0;  // on the nonconformity scale
  std::size_t n_cal = 0;
  std::size_t rank = 0;    // 1-based order statistic used for threshold

  Method method() const { return scoring.config.method; }
  double alpha() const { return scoring.config.alpha; }
};

/// ceil((n + 1)(1 - alpha)), the 1-based calibration order statistic.
std::size_t conformal_rank(std::size_t n, double alpha);

/// The rank-th smallest score (1-based), duplicates counted separately.
double order_statistic(std::vector<double> scores, std::size_t rank);

ScoringModel fit_scoring(const ScoreTensor& cal, const CalibrationConfig& config);

/// Item-major nonconformity matrix; lower is more conforming.
std::vector<double> nonconformity(const ScoringModel& model, const ScoreTensor& t);

/// Single-item convenience wrapper.
std::vector<double> nonconformity(const ScoringModel& model, const ScoreTensor& t,
                                  std::size_t item);

CalibratedPredictor calibrate(const ScoreTensor& cal, const CalibrationConfig& config);

/// Threshold from precomputed true-label scores.
CalibratedPredictor calibrate_from_scores(ScoringModel scoring,
                                          const std::vector<double>& true_scores);

struct SetMember {
  std::uint32_t index = 0;
  double score = 0.0;

  bool operator==(const SetMember&) const = default;
};

struct PredictionSet {
  std::string item_id;
  std::vector<SetMember> members;  // ascending score, ties by index
  Method method = Method::cp;

  bool contains(std::uint32_t cand) const;
  /// 0-based position of cand in members, if present.
  std::optional<std::size_t> position(std::uint32_t cand) const;
};

std::vector<PredictionSet> predict(const CalibratedPredictor& pred,
                                   const ScoreTensor& test);

/// Sets from an already computed nonconformity matrix.
std::vector<PredictionSet> predict_from_scores(const CalibratedPredictor& pred,
                                               const ScoreTensor& test,
                                               const std::vector<double>& scores);

struct ItemEvaluation {
  std::string item_id;
  std::size_t size = 0;
  bool covered = false;
  std::optional<std::size_t> true_index;
};

struct EvalReport {
  std::size_t n_items = 0;
  double coverage = 0.0;
  double mean_size = 0.0;
  double sd_size = 0.0;
  std::optional<double> mean_true_index;  // over covered items only
  std::size_t empty_sets = 0;
  std::vector<ItemEvaluation> items;
};

/// Labels are looked up by item id in truth.
EvalReport evaluate(const std::vector<PredictionSet>& sets, const ScoreTensor& truth);

}  // namespace rvcp
