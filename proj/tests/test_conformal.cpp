#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "rvcp/conformal.hpp"
#include "rvcp/error.hpp"
#include "rvcp/simulator.hpp"

using namespace rvcp;

namespace {

ScoreTensor labelled(std::size_t n, std::size_t k, std::size_t m, std::uint64_t seed,
                     ScoreKind kind = ScoreKind::logit) {
  std::mt19937_64 eng(seed);
  std::normal_distribution<double> nd;
  std::uniform_real_distribution<double> u;
  std::vector<std::string> ids;
  std::vector<double> s;
  std::vector<std::optional<std::uint32_t>> labels;
  for (std::size_t i = 0; i < n; ++i) {
    ids.push_back("x" + std::to_string(i));
    labels.emplace_back(static_cast<std::uint32_t>(i % k));
    for (std::size_t c = 0; c < k; ++c) {
      for (std::size_t j = 0; j < m; ++j) {
        s.push_back(kind == ScoreKind::probability ? u(eng) : nd(eng) + (c == i % k));
      }
    }
  }
  return ScoreTensor(ids, k, m, kind, s, labels);
}

CalibratedPredictor fixed_predictor(Method method, double threshold, std::size_t k) {
  CalibratedPredictor p;
  p.scoring.config.method = method;
  p.scoring.n_candidates = k;
  p.threshold = threshold;
  return p;
}

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "expected an rvcp::Error";
  return ErrorKind::io_error;
}

}  // namespace

TEST(ConformalRank, CeilingArithmetic) {
  EXPECT_EQ(conformal_rank(19, 0.05), 19u);
  EXPECT_EQ(conformal_rank(100, 0.1), 91u);
  EXPECT_EQ(conformal_rank(10, 0.05), 11u);
  EXPECT_EQ(conformal_rank(500, 0.1), 451u);
  EXPECT_EQ(conformal_rank(9, 0.1), 9u);
}

TEST(OrderStatistic, MatchesSortOracle) {
  std::mt19937_64 eng(1);
  std::uniform_int_distribution<int> small(0, 5);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + trial % 37;
    std::vector<double> x(n);
    for (auto& v : x) v = small(eng) * 0.5;
    auto sorted = x;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t rank = 1; rank <= n; ++rank) {
      EXPECT_EQ(order_statistic(x, rank), sorted[rank - 1]);
    }
  }
}

TEST(Calibrate, InsufficientCalibrationMessage) {
  const auto t = labelled(10, 3, 1, 2);
  CalibrationConfig c;
  c.method = Method::cp;
  c.alpha = 0.05;
  try {
    calibrate(t, c);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::insufficient_calibration);
    const std::string msg = e.what();
    EXPECT_NE(msg.find("11"), std::string::npos) << msg;
    EXPECT_NE(msg.find("10"), std::string::npos) << msg;
  }
}

TEST(Calibrate, MissingLabels) {
  const ScoreTensor t({"a", "b"}, 2, 1, ScoreKind::logit, {1, 2, 3, 4}, {0u, std::nullopt});
  CalibrationConfig c;
  c.method = Method::cp;
  EXPECT_EQ(kind_of([&] { calibrate(t, c); }), ErrorKind::missing_labels);
}

TEST(Calibrate, ThresholdIsOrderStatistic) {
  const auto t = labelled(100, 5, 4, 3);
  for (Method m : {Method::cp, Method::cp_avg, Method::cp_rvalue}) {
    CalibrationConfig c;
    c.method = m;
    c.alpha = 0.1;
    const auto pred = calibrate(t, c);
    const auto scores = nonconformity(pred.scoring, t);
    std::vector<double> truth;
    for (std::size_t i = 0; i < 100; ++i) truth.push_back(scores[i * 5 + *t.true_label(i)]);
    std::sort(truth.begin(), truth.end());
    EXPECT_EQ(pred.rank, 91u);
    EXPECT_EQ(pred.threshold, truth[90]);
    EXPECT_EQ(pred.n_cal, 100u);
  }
}

TEST(Nonconformity, Orientation) {
  const ScoreTensor prob({"a"}, 2, 2, ScoreKind::probability, {0.9, 0.2, 0.6, 0.8}, {0u});
  CalibrationConfig c;
  c.method = Method::cp;
  ScoringModel cp{c, 2, ScoreKind::probability, {}, {}};
  auto s = nonconformity(cp, prob);
  EXPECT_NEAR(s[0], 0.1, 1e-15);
  EXPECT_NEAR(s[1], 0.4, 1e-15);

  c.method = Method::cp_avg;
  ScoringModel avg{c, 2, ScoreKind::probability, {}, {}};
  s = nonconformity(avg, prob);
  EXPECT_NEAR(s[1], 0.3, 1e-15);

  const ScoreTensor logit({"a"}, 2, 1, ScoreKind::logit, {2.5, -1.0});
  c.method = Method::cp;
  ScoringModel cpl{c, 2, ScoreKind::logit, {}, {}};
  s = nonconformity(cpl, logit);
  EXPECT_EQ(s[0], -2.5);
  EXPECT_EQ(s[1], 1.0);
}

TEST(Nonconformity, Errors) {
  const ScoreTensor t({"a"}, 2, 2, ScoreKind::logit, {1, 2, 3, 4});
  CalibrationConfig c;
  c.method = Method::cp;
  c.sample_index = 2;
  ScoringModel m{c, 2, ScoreKind::logit, {}, {}};
  EXPECT_EQ(kind_of([&] { nonconformity(m, t); }), ErrorKind::missing_sample);
  m.config.sample_index = 0;
  m.n_candidates = 3;
  EXPECT_EQ(kind_of([&] { nonconformity(m, t); }), ErrorKind::shape_mismatch);
  m.n_candidates = 2;
  m.kind = ScoreKind::probability;
  EXPECT_EQ(kind_of([&] { nonconformity(m, t); }), ErrorKind::shape_mismatch);
}

TEST(Predict, StrictInequalityAndOrder) {
  const ScoreTensor t({"a"}, 3, 1, ScoreKind::logit, {0, 0, 0});
  const auto p = fixed_predictor(Method::cp_rvalue, 0.51, 3);
  auto sets = predict_from_scores(p, t, {0.5, 0.02, 0.9});
  ASSERT_EQ(sets.size(), 1u);
  EXPECT_EQ(sets[0].members, (std::vector<SetMember>{{1, 0.02}, {0, 0.5}}));
  EXPECT_EQ(sets[0].position(0), 1u);
  EXPECT_FALSE(sets[0].contains(2));

  sets = predict_from_scores(fixed_predictor(Method::cp_rvalue, 1.0, 3), t, {1.0, 0.3, 1.0});
  EXPECT_EQ(sets[0].members.size(), 1u);

  sets = predict_from_scores(fixed_predictor(Method::cp_rvalue, 0.2, 3), t, {0.2, 0.3, 1.0});
  EXPECT_TRUE(sets[0].members.empty());
}

TEST(Predict, TiesOrderedByIndex) {
  const ScoreTensor t({"a"}, 3, 1, ScoreKind::logit, {0, 0, 0});
  const auto sets =
      predict_from_scores(fixed_predictor(Method::cp, 5.0, 3), t, {0.4, 0.4, 0.1});
  EXPECT_EQ(sets[0].members, (std::vector<SetMember>{{2, 0.1}, {0, 0.4}, {1, 0.4}}));
}

TEST(Predict, ShapeMismatch) {
  const auto cal = labelled(50, 4, 2, 1);
  CalibrationConfig c;
  c.method = Method::cp_avg;
  const auto pred = calibrate(cal, c);
  const auto other = labelled(5, 3, 2, 1);
  EXPECT_EQ(kind_of([&] { predict(pred, other); }), ErrorKind::shape_mismatch);
}

TEST(Evaluate, HandBuiltFixture) {
  // item: members in order, true label
  const ScoreTensor truth({"a", "b", "c", "d"}, 3, 1, ScoreKind::logit,
                          std::vector<double>(12, 0.0), {0u, 1u, 2u, 0u});
  std::vector<PredictionSet> sets(4);
  sets[0] = {"a", {{0, 0.1}}, Method::cp};                      // covered, idx 0
  sets[1] = {"b", {{2, 0.1}, {0, 0.2}, {1, 0.3}}, Method::cp};  // covered, idx 2
  sets[2] = {"c", {{0, 0.1}}, Method::cp};                      // missed
  sets[3] = {"d", {}, Method::cp};                              // empty, missed
  const auto r = evaluate(sets, truth);
  EXPECT_EQ(r.n_items, 4u);
  EXPECT_DOUBLE_EQ(r.coverage, 0.5);
  EXPECT_DOUBLE_EQ(r.mean_size, 5.0 / 4.0);
  // sizes 1, 3, 1, 0: mean 1.25, sample variance (0.0625+3.0625+0.0625+1.5625)/3
  EXPECT_NEAR(r.sd_size, std::sqrt(4.75 / 3.0), 1e-15);
  ASSERT_TRUE(r.mean_true_index.has_value());
  EXPECT_DOUBLE_EQ(*r.mean_true_index, 1.0);
  EXPECT_EQ(r.empty_sets, 1u);
  EXPECT_EQ(r.items[1].true_index, 2u);
  EXPECT_FALSE(r.items[2].covered);
}

TEST(Evaluate, ExtremeCases) {
  const ScoreTensor truth({"a", "b"}, 2, 1, ScoreKind::logit, {0, 0, 0, 0}, {1u, 0u});
  std::vector<PredictionSet> hit = {{"a", {{1, 0.0}}, Method::cp}, {"b", {{0, 0.0}}, Method::cp}};
  auto r = evaluate(hit, truth);
  EXPECT_EQ(r.coverage, 1.0);
  EXPECT_EQ(r.mean_size, 1.0);
  EXPECT_EQ(*r.mean_true_index, 0.0);

  std::vector<PredictionSet> miss = {{"a", {{0, 0.0}}, Method::cp}, {"b", {}, Method::cp}};
  r = evaluate(miss, truth);
  EXPECT_EQ(r.coverage, 0.0);
  EXPECT_FALSE(r.mean_true_index.has_value());

  const ScoreTensor unlabelled({"a", "b"}, 2, 1, ScoreKind::logit, {0, 0, 0, 0});
  EXPECT_EQ(kind_of([&] { evaluate(hit, unlabelled); }), ErrorKind::missing_labels);
}

TEST(Predict, NestedInAlpha) {
  GenerativeSpec spec;
  spec.n_candidates = 20;
  spec.n_samples = 5;
  spec.n_cal = 200;
  spec.n_test = 100;
  spec.rng.seed = 4;
  const auto data = generate(spec);
  for (Method m : {Method::cp, Method::cp_avg, Method::cp_rvalue}) {
    for (Estimator e : {Estimator::parametric, Estimator::nonparametric}) {
      CalibrationConfig c;
      c.method = m;
      c.estimator = e;
      c.alpha = 0.05;
      const auto wide = predict(calibrate(data.cal, c), data.test);
      c.alpha = 0.2;
      const auto narrow = predict(calibrate(data.cal, c), data.test);
      for (std::size_t i = 0; i < wide.size(); ++i) {
        for (const auto& mem : narrow[i].members) EXPECT_TRUE(wide[i].contains(mem.index));
      }
    }
  }
}

TEST(Predict, ZeroVarianceRvalueEqualsAverage) {
  GenerativeSpec spec;
  spec.n_candidates = 30;
  spec.n_samples = 8;
  spec.n_cal = 300;
  spec.n_test = 200;
  spec.rng.seed = 12;
  const auto data = generate(spec);
  CalibrationConfig c;
  c.method = Method::cp_avg;
  const auto avg = predict(calibrate(data.cal, c), data.test);
  c.method = Method::cp_rvalue;
  c.variance_mode = VarianceMode::zero;
  const auto r = predict(calibrate(data.cal, c), data.test);
  for (std::size_t i = 0; i < avg.size(); ++i) {
    ASSERT_EQ(avg[i].members.size(), r[i].members.size()) << i;
    for (std::size_t j = 0; j < avg[i].members.size(); ++j) {
      EXPECT_EQ(avg[i].members[j].index, r[i].members[j].index);
    }
  }
}

TEST(Names, Methods) {
  EXPECT_EQ(parse_method("cp-avg"), Method::cp_avg);
  EXPECT_EQ(parse_method("cp_rvalue"), Method::cp_rvalue);
  EXPECT_EQ(to_string(Method::cp_rvalue), "cp-rvalue");
  EXPECT_EQ(kind_of([] { parse_method("aps"); }), ErrorKind::invalid_argument);
}
