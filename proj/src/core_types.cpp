#include "rvcp/core_types.hpp"

#include <cmath>
#include <sstream>
#include <unordered_set>

#include "rvcp/error.hpp"
#include "rvcp/simd/kernels.hpp"

namespace rvcp {

std::string_view to_string(ScoreKind kind) {
  switch (kind) {
    case ScoreKind::logit: return "logit";
    case ScoreKind::probability: return "probability";
    case ScoreKind::evaluator: return "evaluator";
  }
  return "logit";
}

ScoreKind parse_score_kind(std::string_view text) {
  if (text == "logit") return ScoreKind::logit;
  if (text == "probability") return ScoreKind::probability;
  if (text == "evaluator") return ScoreKind::evaluator;
  throw Error(ErrorKind::invalid_argument,
              "unknown score_kind '" + std::string(text) + "'");
}

std::string_view to_string(VarianceMode mode) {
  switch (mode) {
    case VarianceMode::raw: return "raw";
    case VarianceMode::standard_error: return "standard-error";
    case VarianceMode::zero: return "zero";
  }
  return "standard-error";
}

VarianceMode parse_variance_mode(std::string_view text) {
  if (text == "raw") return VarianceMode::raw;
  if (text == "standard-error" || text == "standard_error") {
    return VarianceMode::standard_error;
  }
  if (text == "zero") return VarianceMode::zero;
  throw Error(ErrorKind::invalid_argument,
              "unknown variance mode '" + std::string(text) + "'");
}

ScoreTensor::ScoreTensor(std::vector<std::string> item_ids,
                         std::size_t n_candidates, std::size_t n_samples,
                         ScoreKind kind, std::vector<double> scores,
                         std::vector<std::optional<std::uint32_t>> true_labels)
    : item_ids_(std::move(item_ids)),
      n_candidates_(n_candidates),
      n_samples_(n_samples),
      kind_(kind),
      scores_(std::move(scores)),
      true_labels_(std::move(true_labels)) {
  if (scores_.size() != item_ids_.size() * n_candidates_ * n_samples_) {
    throw Error(ErrorKind::shape_mismatch,
                "score array holds " + std::to_string(scores_.size()) +
                    " values, expected items*K*M = " +
                    std::to_string(item_ids_.size() * n_candidates_ * n_samples_));
  }
  if (!true_labels_.empty() && true_labels_.size() != item_ids_.size()) {
    throw Error(ErrorKind::shape_mismatch,
                "true_label array length differs from item count");
  }
}

std::span<const double> ScoreTensor::item_scores(std::size_t item) const {
  const std::size_t stride = n_candidates_ * n_samples_;
  return std::span<const double>(scores_).subspan(item * stride, stride);
}

std::span<const double> ScoreTensor::samples(std::size_t item,
                                             std::size_t cand) const {
  return std::span<const double>(scores_).subspan(
      (item * n_candidates_ + cand) * n_samples_, n_samples_);
}

std::optional<std::uint32_t> ScoreTensor::true_label(std::size_t item) const {
  if (true_labels_.empty()) return std::nullopt;
  return true_labels_[item];
}

bool ScoreTensor::fully_labelled() const {
  if (true_labels_.empty()) return n_items() == 0;
  for (const auto& l : true_labels_) {
    if (!l) return false;
  }
  return true;
}

ScoreTensor ScoreTensor::select(std::span<const std::size_t> items) const {
  std::vector<std::string> ids;
  std::vector<double> scores;
  std::vector<std::optional<std::uint32_t>> labels;
  ids.reserve(items.size());
  scores.reserve(items.size() * n_candidates_ * n_samples_);
  for (std::size_t i : items) {
    ids.push_back(item_ids_.at(i));
    const auto block = item_scores(i);
    scores.insert(scores.end(), block.begin(), block.end());
    if (!true_labels_.empty()) labels.push_back(true_labels_[i]);
  }
  return ScoreTensor(std::move(ids), n_candidates_, n_samples_, kind_,
                     std::move(scores), std::move(labels));
}

ScoreTensor ScoreTensor::concat(const ScoreTensor& a, const ScoreTensor& b) {
  if (a.n_candidates_ != b.n_candidates_ || a.n_samples_ != b.n_samples_ ||
      a.kind_ != b.kind_) {
    throw Error(ErrorKind::shape_mismatch,
                "cannot concatenate tensors with different K, M or score kind");
  }
  std::vector<std::string> ids = a.item_ids_;
  ids.insert(ids.end(), b.item_ids_.begin(), b.item_ids_.end());
  std::vector<double> scores = a.scores_;
  scores.insert(scores.end(), b.scores_.begin(), b.scores_.end());
  std::vector<std::optional<std::uint32_t>> labels;
  if (!a.true_labels_.empty() || !b.true_labels_.empty()) {
    labels = a.true_labels_;
    labels.resize(a.n_items());
    labels.insert(labels.end(), b.true_labels_.begin(), b.true_labels_.end());
    labels.resize(a.n_items() + b.n_items());
  }
  return ScoreTensor(std::move(ids), a.n_candidates_, a.n_samples_, a.kind_,
                     std::move(scores), std::move(labels));
}

ValidationReport validate_tensor(const ScoreTensor& t) {
  ValidationReport report;
  auto& v = report.violations;
  if (t.n_samples() < 1) v.push_back("M must be >= 1");
  if (t.n_candidates() < 2) v.push_back("K must be >= 2");

  std::unordered_set<std::string> seen;
  for (const auto& id : t.item_ids()) {
    if (!seen.insert(id).second) v.push_back("duplicate item id '" + id + "'");
  }

  const bool probability = t.kind() == ScoreKind::probability;
  for (std::size_t i = 0; i < t.n_items(); ++i) {
    for (std::size_t c = 0; c < t.n_candidates(); ++c) {
      for (std::size_t m = 0; m < t.n_samples(); ++m) {
        const double s = t.at(i, c, m);
        std::ostringstream where;
        where << "(" << i << "," << c << "," << m << ")";
        if (!std::isfinite(s)) {
          v.push_back("non-finite score at " + where.str());
        } else if (probability && (s < 0.0 || s > 1.0)) {
          v.push_back("probability score outside [0,1] at " + where.str());
        }
      }
    }
    if (const auto label = t.true_label(i);
        label && *label >= t.n_candidates()) {
      v.push_back("true_label " + std::to_string(*label) + " of item '" +
                  t.item_id(i) + "' outside [0, K)");
    }
  }
  return report;
}

void require_valid(const ScoreTensor& t) {
  const auto report = validate_tensor(t);
  if (report.ok()) return;
  std::string msg = "invalid score tensor: " + report.violations.front();
  if (report.violations.size() > 1) {
    msg += " (+" + std::to_string(report.violations.size() - 1) + " more)";
  }
  throw Error(ErrorKind::invalid_argument, msg);
}

CandidateStats candidate_stats(const ScoreTensor& t, VarianceMode mode) {
  const auto& k = simd::active();
  const std::size_t m = t.n_samples();
  CandidateStats out;
  out.n_items = t.n_items();
  out.n_candidates = t.n_candidates();
  out.values.resize(out.n_items * out.n_candidates);
  for (std::size_t i = 0; i < out.n_items; ++i) {
    for (std::size_t c = 0; c < out.n_candidates; ++c) {
      const auto xs = t.samples(i, c);
      CandidateStat& st = out.values[i * out.n_candidates + c];
      st.mean = k.sum(xs.data(), m) / static_cast<double>(m);
      st.var = m > 1 ? k.sum_sq_dev(xs.data(), m, st.mean) /
                           static_cast<double>(m - 1)
                     : 0.0;
      st.obs = st.mean;
      switch (mode) {
        case VarianceMode::raw: st.obs_var = st.var; break;
        case VarianceMode::standard_error:
          st.obs_var = st.var / static_cast<double>(m);
          break;
        case VarianceMode::zero: st.obs_var = 0.0; break;
      }
    }
  }
  return out;
}

}  // namespace rvcp
