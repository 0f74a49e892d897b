#include <cmath>
#include <limits>
#include <vector>

#include <gtest/gtest.h>

#include "rvcp/core_types.hpp"
#include "rvcp/error.hpp"

using namespace rvcp;

namespace {

ScoreTensor small_tensor() {
  // 2 items, K = 3, M = 2.
  std::vector<double> s = {1, 2, 3, 4, 5, 6,   //
                           0, 0, 1, 3, -1, -3};
  return ScoreTensor({"a", "b"}, 3, 2, ScoreKind::logit, s, {2u, std::nullopt});
}

template <class F>
ErrorKind kind_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "expected an rvcp::Error";
  return ErrorKind::io_error;
}

}  // namespace

TEST(ScoreTensor, Layout) {
  const auto t = small_tensor();
  EXPECT_EQ(t.n_items(), 2u);
  EXPECT_EQ(t.at(0, 1, 0), 3.0);
  EXPECT_EQ(t.at(1, 2, 1), -3.0);
  EXPECT_EQ(t.samples(1, 1)[0], 1.0);
  EXPECT_EQ(t.item_scores(1).size(), 6u);
  EXPECT_EQ(t.true_label(0), 2u);
  EXPECT_FALSE(t.true_label(1).has_value());
  EXPECT_FALSE(t.fully_labelled());
}

TEST(ScoreTensor, ShapeMismatch) {
  EXPECT_EQ(kind_of([] { ScoreTensor({"a"}, 2, 2, ScoreKind::logit, {1, 2, 3}); }),
            ErrorKind::shape_mismatch);
  EXPECT_EQ(kind_of([] {
              ScoreTensor({"a"}, 2, 1, ScoreKind::logit, {1, 2}, {0u, 1u});
            }),
            ErrorKind::shape_mismatch);
}

TEST(ScoreTensor, SelectAndConcat) {
  const auto t = small_tensor();
  const std::vector<std::size_t> order = {1, 0};
  const auto s = t.select(order);
  EXPECT_EQ(s.item_id(0), "b");
  EXPECT_EQ(s.at(0, 2, 1), -3.0);
  EXPECT_EQ(s.true_label(1), 2u);

  const auto c = ScoreTensor::concat(t, s);
  EXPECT_EQ(c.n_items(), 4u);
  EXPECT_EQ(c.item_id(3), "a");
  EXPECT_EQ(c.at(3, 0, 0), 1.0);
}

TEST(Validation, FlagsBadInput) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  const ScoreTensor bad({"x", "x"}, 2, 1, ScoreKind::probability, {0.5, nan, 1.2, 0.1},
                        {0u, 5u});
  const auto rep = validate_tensor(bad);
  ASSERT_FALSE(rep.ok());
  std::string all;
  for (const auto& v : rep.violations) all += v + "\n";
  EXPECT_NE(all.find("non-finite score at (0,1,0)"), std::string::npos) << all;
  EXPECT_NE(all.find("outside [0,1]"), std::string::npos) << all;
  EXPECT_NE(all.find("duplicate"), std::string::npos) << all;
  EXPECT_NE(all.find("label"), std::string::npos) << all;
  EXPECT_EQ(kind_of([&] { require_valid(bad); }), ErrorKind::invalid_argument);
  EXPECT_TRUE(validate_tensor(small_tensor()).ok());
}

TEST(Validation, NeedsTwoCandidates) {
  const ScoreTensor one({"x"}, 1, 1, ScoreKind::logit, {0.0});
  EXPECT_FALSE(validate_tensor(one).ok());
}

TEST(CandidateStats, MomentsPerMode) {
  const auto t = small_tensor();
  // item 1, candidate 1: samples {1, 3}: mean 2, unbiased variance 2.
  const auto se = candidate_stats(t, VarianceMode::standard_error);
  const auto& c = se.item(1)[1];
  EXPECT_DOUBLE_EQ(c.mean, 2.0);
  EXPECT_DOUBLE_EQ(c.var, 2.0);
  EXPECT_DOUBLE_EQ(c.obs, 2.0);
  EXPECT_DOUBLE_EQ(c.obs_var, 1.0);

  EXPECT_DOUBLE_EQ(candidate_stats(t, VarianceMode::raw).item(1)[1].obs_var, 2.0);
  EXPECT_DOUBLE_EQ(candidate_stats(t, VarianceMode::zero).item(1)[1].obs_var, 0.0);
}

TEST(CandidateStats, SingleSampleHasZeroVariance) {
  const ScoreTensor t({"a"}, 2, 1, ScoreKind::logit, {1.5, -2.0});
  const auto st = candidate_stats(t);
  EXPECT_EQ(st.values[0].obs, 1.5);
  EXPECT_EQ(st.values[1].obs_var, 0.0);
}

TEST(CandidateStats, MatchesNaiveTwoPass) {
  std::vector<double> s;
  for (int i = 0; i < 3 * 37; ++i) s.push_back(std::sin(i * 0.7) * 10.0 + i * 0.01);
  const ScoreTensor t({"a"}, 3, 37, ScoreKind::logit, s);
  const auto st = candidate_stats(t, VarianceMode::raw);
  for (std::size_t c = 0; c < 3; ++c) {
    long double m = 0, v = 0;
    for (std::size_t j = 0; j < 37; ++j) m += s[c * 37 + j];
    m /= 37;
    for (std::size_t j = 0; j < 37; ++j) v += (s[c * 37 + j] - m) * (s[c * 37 + j] - m);
    v /= 36;
    EXPECT_NEAR(st.values[c].mean, static_cast<double>(m), 1e-13);
    EXPECT_NEAR(st.values[c].var, static_cast<double>(v), 1e-11);
  }
}

TEST(Names, RoundTrip) {
  for (auto k : {ScoreKind::logit, ScoreKind::probability, ScoreKind::evaluator}) {
    EXPECT_EQ(parse_score_kind(to_string(k)), k);
  }
  for (auto m : {VarianceMode::raw, VarianceMode::standard_error, VarianceMode::zero}) {
    EXPECT_EQ(parse_variance_mode(to_string(m)), m);
  }
  EXPECT_EQ(parse_variance_mode("standard_error"), VarianceMode::standard_error);
  EXPECT_EQ(kind_of([] { parse_score_kind("softmax"); }), ErrorKind::invalid_argument);
}
