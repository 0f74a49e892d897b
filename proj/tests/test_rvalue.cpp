#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "rvcp/error.hpp"
#include "rvcp/normal.hpp"
#include "rvcp/rvalue.hpp"

using namespace rvcp;

namespace {

CandidateStat stat(double obs, double obs_var) { return {obs, obs_var, obs, obs_var}; }

// Exact r for a standardized prior with g a point mass at s0: the root in
// beta of x = t_beta(s), where z_beta = theta (sqrt(1 + s0) - 1) / sqrt(s0).
double r_point_mass_oracle(double x, double s, double s0) {
  const double c0 = (std::sqrt(1 + s0) - 1) / std::sqrt(s0);
  auto t = [&](double beta) {
    const double theta = -normal::quantile(beta);
    return theta * (1 + s) - theta * c0 * std::sqrt(s * (1 + s));
  };
  double lo = 1e-15, hi = 1 - 1e-15;  // t decreasing in beta
  if (x >= t(lo)) return 0.0;
  if (x < t(hi)) return 1.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (x >= t(mid) ? hi : lo) = mid;
  }
  return hi;
}

ScoreTensor tensor(std::size_t n, std::size_t k, std::size_t m, std::vector<double> s) {
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < n; ++i) ids.push_back("i" + std::to_string(i));
  return ScoreTensor(ids, k, m, ScoreKind::logit, std::move(s));
}

ScoreTensor random_tensor(std::size_t n, std::size_t k, std::size_t m, std::uint64_t seed) {
  std::mt19937_64 eng(seed);
  std::normal_distribution<double> nd;
  std::vector<double> s(n * k * m);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < k; ++c) {
      const double theta = nd(eng), sd = 0.3 + (c % 3);
      for (std::size_t j = 0; j < m; ++j) s[(i * k + c) * m + j] = theta + sd * nd(eng);
    }
  }
  return tensor(n, k, m, s);
}

// Brute-force nonparametric r straight from the definitions, using only the
// raw tensor: explicit per-sample sorting, explicit quantile matching.
std::vector<double> np_oracle(const ScoreTensor& t) {
  const std::size_t n = t.n_items(), k = t.n_candidates(), m = t.n_samples();
  // V[i][c][level-1] as a count.
  std::vector<std::vector<std::vector<int>>> V(n, std::vector<std::vector<int>>(k, std::vector<int>(k)));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t s = 0; s < m; ++s) {
      std::vector<std::size_t> order(k);
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return t.at(i, a, s) > t.at(i, b, s);
      });
      for (std::size_t pos = 0; pos < k; ++pos) {
        for (std::size_t lvl = pos + 1; lvl <= k; ++lvl) ++V[i][order[pos]][lvl - 1];
      }
    }
  }
  std::vector<int> bar(k);
  for (std::size_t lvl = 1; lvl <= k; ++lvl) {
    for (int v = 0; v <= static_cast<int>(m) + 1; ++v) {
      std::size_t above = 0;
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t c = 0; c < k; ++c) above += V[i][c][lvl - 1] >= v;
      if (above <= lvl * n) {
        bar[lvl - 1] = v;
        break;
      }
    }
  }
  std::vector<double> r;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < k; ++c) {
      double val = 1.0;
      for (std::size_t lvl = 1; lvl <= k; ++lvl) {
        if (V[i][c][lvl - 1] >= bar[lvl - 1]) {
          val = static_cast<double>(lvl) / k;
          break;
        }
      }
      r.push_back(val);
    }
  }
  return r;
}

}  // namespace

TEST(RParametric, ZeroVarianceHitsGridPoint) {
  const auto table = build_threshold_table(make_model(0, 1, {1.0}));
  const double theta05 = -normal::quantile(0.05);
  EXPECT_NEAR(r_parametric_one(stat(theta05, 0), table), 0.05, 1e-12);
  EXPECT_NEAR(r_parametric_one(stat(theta05, 0), table, false), 0.05, 1e-12);
}

TEST(RParametric, ZeroVarianceIsUpperTail) {
  const auto table = build_threshold_table(make_model(0, 1, {1.0}));
  for (double x : {-2.0, -0.3, 0.0, 0.77, 1.9, 2.8}) {
    EXPECT_NEAR(r_parametric_one(stat(x, 0), table), normal::sf(x), 1e-9) << x;
    EXPECT_NEAR(r_parametric_one(stat(x, 0), table, false), normal::sf(x), 1e-3) << x;
  }
}

TEST(RParametric, InverseOfThresholdExample) {
  const auto table = build_threshold_table(make_model(0, 1, {1.0}));
  EXPECT_NEAR(r_parametric_one(stat(2.3262, 1.0), table), 0.05, 1e-4);
}

TEST(RParametric, MatchesClosedFormOracle) {
  const auto table = build_threshold_table(make_model(0, 1, {1.0}));
  std::mt19937_64 eng(3);
  std::uniform_real_distribution<double> ux(-2.5, 4.0), us(0.0, 5.0);
  for (int i = 0; i < 500; ++i) {
    const double x = ux(eng), s = us(eng);
    const double oracle = std::clamp(r_point_mass_oracle(x, s, 1.0), 0.001, 1.0);
    const double refined = r_parametric_one(stat(x, s), table);
    const double grid = r_parametric_one(stat(x, s), table, false);
    EXPECT_NEAR(refined, oracle, 2e-6) << x << " " << s;
    // Grid value is the first grid point at or above the exact root.
    EXPECT_GE(grid + 1e-12, oracle);
    EXPECT_LT(grid - 0.001, oracle + 1e-12);
  }
}

TEST(RParametric, DataUnitsMatchStandardized) {
  const auto table = build_threshold_table(make_model(3.0, 4.0, {4.0}));
  const auto std_table = build_threshold_table(make_model(0.0, 1.0, {1.0}));
  for (double x : {-1.0, 0.5, 2.0}) {
    EXPECT_NEAR(r_parametric_one(stat(3.0 + 2.0 * x, 4.0 * 0.7), table),
                r_parametric_one(stat(x, 0.7), std_table), 1e-12);
  }
}

TEST(RParametric, ClippedRange) {
  const auto table = build_threshold_table(make_model(0, 1, {1.0}), 99);
  EXPECT_EQ(r_parametric_one(stat(50.0, 0.1), table), 0.01);
  EXPECT_EQ(r_parametric_one(stat(-50.0, 0.1), table), 1.0);
}

TEST(RParametric, MonotoneInObs) {
  const auto table = build_threshold_table(make_model(0, 1, {0.2, 3.0}));
  for (double s : {0.0, 0.2, 1.0, 3.0}) {
    double prev = 2.0;
    for (double x = -4; x <= 5; x += 0.01) {
      const double r = r_parametric_one(stat(x, s), table);
      EXPECT_LE(r, prev);
      EXPECT_GT(r, 0.0);
      prev = r;
    }
  }
}

TEST(RParametric, ZeroVarianceOrderingIsScoreOrdering) {
  std::mt19937_64 eng(8);
  std::normal_distribution<double> nd;
  std::vector<CandidateStat> item;
  for (int c = 0; c < 40; ++c) item.push_back(stat(nd(eng), 0.0));
  const auto table = build_threshold_table(make_model(0, 1, {1.0}));
  const auto r = r_parametric(item, table);
  for (std::size_t a = 0; a < item.size(); ++a) {
    for (std::size_t b = 0; b < item.size(); ++b) {
      if (item[a].obs > item[b].obs) {
        EXPECT_LE(r[a], r[b]);
      }
    }
  }
}

TEST(RankProfile, SingleSample) {
  const auto t = tensor(1, 2, 1, {5, 3});
  const auto p = rank_profile(t, 0);
  EXPECT_EQ(p.v(0, 1), 1.0);
  EXPECT_EQ(p.v(0, 2), 1.0);
  EXPECT_EQ(p.v(1, 1), 0.0);
  EXPECT_EQ(p.v(1, 2), 1.0);
}

TEST(RankProfile, FirstThenThird) {
  // Candidate 0 is first in sample 0 and third in sample 1.
  const auto t = tensor(1, 3, 2, {9, 0, 5, 2, 1, 1});
  const auto p = rank_profile(t, 0);
  EXPECT_EQ(p.v(0, 1), 0.5);
  EXPECT_EQ(p.v(0, 2), 0.5);
  EXPECT_EQ(p.v(0, 3), 1.0);
}

TEST(RankProfile, TieGoesToLowerIndex) {
  const auto t = tensor(1, 3, 1, {2, 2, 2});
  const auto p = rank_profile(t, 0);
  EXPECT_EQ(p.count(0, 1), 1u);
  EXPECT_EQ(p.count(1, 1), 0u);
  EXPECT_EQ(p.count(1, 2), 1u);
  EXPECT_EQ(p.count(2, 2), 0u);
}

TEST(RankProfile, NondecreasingAndEndsAtOne) {
  const auto t = random_tensor(3, 7, 11, 1);
  for (const auto& p : rank_profiles(t)) {
    for (std::size_t c = 0; c < 7; ++c) {
      for (std::size_t k = 2; k <= 7; ++k) EXPECT_LE(p.count(c, k - 1), p.count(c, k));
      EXPECT_EQ(p.v(c, 7), 1.0);
    }
  }
}

TEST(RNonparametric, BruteForceSmall) {
  const auto t = random_tensor(2, 4, 3, 77);
  const auto r = r_nonparametric(t, false);
  EXPECT_EQ(r.values, np_oracle(t));
}

TEST(RNonparametric, BruteForceRandomWithTies) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto t = random_tensor(5, 6, 9, seed);
    std::vector<double> s(t.scores().begin(), t.scores().end());
    for (auto& x : s) x = std::round(x);  // integer scores force ties
    t = tensor(5, 6, 9, s);
    EXPECT_EQ(r_nonparametric(t, false).values, np_oracle(t)) << seed;
  }
}

TEST(RNonparametric, AlwaysFirstGetsOneOverK) {
  // One-item population: candidate 2 leads every sample, nobody else leads.
  std::vector<double> s(4 * 5);
  for (std::size_t c = 0; c < 4; ++c)
    for (std::size_t j = 0; j < 5; ++j) s[c * 5 + j] = c == 2 ? 10.0 : std::sin(c + 3.0 * j);
  const auto r = r_nonparametric(tensor(1, 4, 5, s), false);
  EXPECT_DOUBLE_EQ(r.item(0)[2], 0.25);
  for (std::size_t c : {0u, 1u, 3u}) EXPECT_GT(r.item(0)[c], 0.25);
}

TEST(RNonparametric, ConstantScoresFollowIndexOrder) {
  const auto t = tensor(3, 4, 2, std::vector<double>(24, 1.0));
  const auto r = r_nonparametric(t, false);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t c = 0; c < 4; ++c) EXPECT_DOUBLE_EQ(r.item(i)[c], (c + 1) / 4.0);
  }
}

TEST(LambdaTable, QuantileMatching) {
  const auto t = random_tensor(30, 8, 25, 4);
  const auto profiles = rank_profiles(t);
  const auto lambda = fit_lambda(profiles);
  const std::size_t n = 30, k = 8;
  for (std::size_t lvl = 1; lvl <= k; ++lvl) {
    auto count_at_least = [&](std::uint32_t v) {
      std::size_t a = 0;
      for (const auto& p : profiles)
        for (std::size_t c = 0; c < k; ++c) a += p.count(c, lvl) >= v;
      return a;
    };
    const std::uint32_t bar = lambda.bar[lvl - 1];
    EXPECT_LE(count_at_least(bar), lvl * n);
    if (bar > 0) {
      EXPECT_GT(count_at_least(bar - 1), lvl * n);
    }
    EXPECT_DOUBLE_EQ(lambda.pass_fraction[lvl - 1],
                     static_cast<double>(count_at_least(bar)) / (n * k));
  }
}

TEST(LambdaTable, TieFreeMarginalFraction) {
  // One item per "population", K = 2, M = 4 samples arranged so the level-1
  // counts are all distinct across items.
  std::vector<double> s;
  const std::size_t n = 4, m = 4;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) s.push_back(j < i ? 1.0 : -1.0);  // cand 0
    for (std::size_t j = 0; j < m; ++j) s.push_back(0.0);                // cand 1
  }
  const auto t = tensor(n, 2, m, s);
  const auto lambda = fit_lambda(rank_profiles(t));
  // Level-1 counts: cand 0 has i, cand 1 has 4 - i; values {0..4} and {4..1}.
  EXPECT_NEAR(lambda.pass_fraction[0], 0.5, 1.0 / (n * 2) + 1e-15);
  EXPECT_EQ(lambda.pass_fraction[1], 1.0);
}

TEST(LambdaTable, Errors) {
  std::vector<RankFrequencyProfile> none;
  EXPECT_THROW(fit_lambda(none), Error);
  auto a = rank_profiles(random_tensor(1, 3, 2, 1));
  auto b = rank_profiles(random_tensor(1, 4, 2, 1));
  a.push_back(b[0]);
  try {
    fit_lambda(a);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::shape_mismatch);
  }
}

TEST(RNonparametric, RefinedStaysInGridCell) {
  const auto t = random_tensor(20, 6, 15, 12);
  const auto grid = r_nonparametric(t, false);
  const auto fine = r_nonparametric(t, true);
  for (std::size_t i = 0; i < grid.values.size(); ++i) {
    EXPECT_LE(fine.values[i], grid.values[i]);
    EXPECT_GT(fine.values[i], grid.values[i] - 1.0 / 6 - 1e-15);
    EXPECT_GT(fine.values[i], 0.0);
  }
}

TEST(RNonparametric, RaisingScoresNeverHurts) {
  const auto base = random_tensor(10, 5, 12, 21);
  const auto profiles = rank_profiles(base);
  const auto lambda = fit_lambda(profiles);
  for (std::size_t c = 0; c < 5; ++c) {
    std::vector<double> s(base.scores().begin(), base.scores().end());
    for (std::size_t j = 0; j < 12; ++j) s[(3 * 5 + c) * 12 + j] += 0.8;
    const auto raised = tensor(10, 5, 12, s);
    for (bool refine : {false, true}) {
      const auto before = r_nonparametric(profiles[3], lambda, refine);
      const auto after = r_nonparametric(rank_profile(raised, 3), lambda, refine);
      EXPECT_LE(after[c], before[c]) << c;
    }
  }
}
