#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace rvcp {

enum class ScoreKind { logit, probability, evaluator };

std::string_view to_string(ScoreKind kind);
ScoreKind parse_score_kind(std::string_view text);

/// Dense items x candidates x samples score array. Each candidate's samples
/// are contiguous, so per-candidate reductions stream through memory.
class ScoreTensor {
 public:
  ScoreTensor() = default;
  ScoreTensor(std::vector<std::string> item_ids, std::size_t n_candidates,
              std::size_t n_samples, ScoreKind kind, std::vector<double> scores,
              std::vector<std::optional<std::uint32_t>> true_labels = {});

  std::size_t n_items() const noexcept { return item_ids_.size(); }
  std::size_t n_candidates() const noexcept { return n_candidates_; }
  std::size_t n_samples() const noexcept { return n_samples_; }
  ScoreKind kind() const noexcept { return kind_; }

  const std::vector<std::string>& item_ids() const noexcept { return item_ids_; }
  const std::string& item_id(std::size_t item) const { return item_ids_[item]; }

  std::span<const double> scores() const noexcept { return scores_; }
  std::span<const double> item_scores(std::size_t item) const;
  std::span<const double> samples(std::size_t item, std::size_t cand) const;
  double at(std::size_t item, std::size_t cand, std::size_t sample) const {
    return scores_[(item * n_candidates_ + cand) * n_samples_ + sample];
  }

  /// Empty when the tensor carries no labels at all.
  const std::vector<std::optional<std::uint32_t>>& true_labels() const noexcept {
    return true_labels_;
  }
  std::optional<std::uint32_t> true_label(std::size_t item) const;
  bool fully_labelled() const;

  /// New tensor holding the listed items in the given order.
  ScoreTensor select(std::span<const std::size_t> items) const;

  /// Merge items of two tensors with identical shape and kind.
  static ScoreTensor concat(const ScoreTensor& a, const ScoreTensor& b);

 private:
  std::vector<std::string> item_ids_;
  std::size_t n_candidates_ = 0;
  std::size_t n_samples_ = 0;
  ScoreKind kind_ = ScoreKind::logit;
  std::vector<double> scores_;
  std::vector<std::optional<std::uint32_t>> true_labels_;
};

struct ValidationReport {
  std::vector<std::string> violations;

  bool ok() const noexcept { return violations.empty(); }
};

ValidationReport validate_tensor(const ScoreTensor& t);

/// Throws Error(invalid_argument) carrying the first few violations.
void require_valid(const ScoreTensor& t);

enum class VarianceMode {
  raw,             // obs_var = per-sample variance
  standard_error,  // obs_var = variance / M (variance of the sample mean)
  zero,            // obs_var forced to 0: the average-then-CP limit
};

std::string_view to_string(VarianceMode mode);
VarianceMode parse_variance_mode(std::string_view text);

struct CandidateStat {
  double mean = 0.0;
  double var = 0.0;
  double obs = 0.0;
  double obs_var = 0.0;
};

/// Candidate statistics laid out item-major: stats[item * K + cand].
struct CandidateStats {
  std::size_t n_items = 0;
  std::size_t n_candidates = 0;
  std::vector<CandidateStat> values;

  std::span<const CandidateStat> item(std::size_t i) const {
    return std::span<const CandidateStat>(values).subspan(i * n_candidates,
                                                          n_candidates);
  }
};

CandidateStats candidate_stats(const ScoreTensor& t,
                               VarianceMode mode = VarianceMode::standard_error);

}  // namespace rvcp
