#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "affect_sdt/error.hpp"
#include "affect_sdt/rng.hpp"
#include "affect_sdt/sdt.hpp"
#include "oracles.hpp"

using namespace affect_sdt;

TEST(Probit, MatchesHighPrecisionOracle) {
  Rng rng(1);
  double worst = 0.0;
  for (int i = 0; i < 10000; ++i) {
    double p;
    if (i % 4 == 0) {
      p = std::pow(10.0, -15.0 * rng.uniform());
      if (i % 8 == 0) p = 1.0 - p;
    } else {
      p = rng.uniform();
    }
    if (p <= 0.0 || p >= 1.0) continue;
    worst = std::max(worst, std::abs(probit(p) - oracle::probit(p)));
  }
  EXPECT_LT(worst, 1e-9);
}

TEST(Probit, RejectsBoundaries) {
  EXPECT_THROW(probit(0.0), DomainError);
  EXPECT_THROW(probit(1.0), DomainError);
  EXPECT_THROW(probit(-0.5), DomainError);
  EXPECT_DOUBLE_EQ(probit(0.5), 0.0);
}

TEST(Rates, CountsPerCondition) {
  const std::vector<Observation> obs{{1, Condition::Human}, {2, Condition::Human},
                                     {3, Condition::Human}, {3, Condition::Human},
                                     {1, Condition::AI},    {1, Condition::AI},
                                     {2, Condition::AI}};
  const auto r = estimate_rates(obs);
  EXPECT_EQ(r.n_human, 4u);
  EXPECT_EQ(r.n_ai, 3u);
  EXPECT_DOUBLE_EQ(r.hit_12, 0.75);
  EXPECT_DOUBLE_EQ(r.hit_23, 0.5);
  EXPECT_DOUBLE_EQ(r.false_12, 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(r.false_23, 1.0 / 6.0);  // 0 replaced by 1 / (2n)
}

TEST(Rates, RateOfOneIsPulledIn) {
  const std::vector<Observation> obs{{3, Condition::Human}, {3, Condition::Human},
                                     {1, Condition::AI},    {2, Condition::AI}};
  const auto r = estimate_rates(obs);
  EXPECT_DOUBLE_EQ(r.hit_12, 0.75);
  EXPECT_DOUBLE_EQ(r.hit_23, 0.75);
}

TEST(Rates, EmptyConditionThrows) {
  const std::vector<Observation> obs{{3, Condition::Human}};
  EXPECT_THROW(estimate_rates(obs), DomainError);
}

TEST(Criteria, NegatedProbitOfRates) {
  ResponseRates r;
  r.hit_12 = 0.8;
  r.hit_23 = 0.3;
  r.false_12 = 0.6;
  r.false_23 = 0.1;
  const auto h = criteria_for(Condition::Human, r);
  EXPECT_NEAR(h.c1, -oracle::probit(0.8), 1e-12);
  EXPECT_NEAR(h.c2, -oracle::probit(0.3), 1e-12);
  const auto a = criteria_for(Condition::AI, r);
  EXPECT_NEAR(a.c1, -oracle::probit(0.6), 1e-12);
  EXPECT_NEAR(a.c2, -oracle::probit(0.1), 1e-12);
}

TEST(Predict, ThresholdRule) {
  SdtModel m;
  m.rates.hit_12 = 0.5;  // c1 = 0
  m.rates.hit_23 = 1.0 - 0.8413447460685429;  // c2 = 1
  m.rates.n_human = 10;
  EXPECT_EQ(predict(-0.1, Condition::Human, m), 1);
  EXPECT_EQ(predict(0.0, Condition::Human, m), 1);
  EXPECT_EQ(predict(0.5, Condition::Human, m), 2);
  EXPECT_EQ(predict(1.0 + 1e-9, Condition::Human, m), 3);
}

TEST(Predict, SecondHypothesisReversesRatings) {
  const std::vector<Observation> obs{{1, Condition::Human}, {3, Condition::Human},
                                     {3, Condition::Human}, {2, Condition::AI},
                                     {1, Condition::AI},    {3, Condition::AI}};
  const auto h2 = fit_sdt(obs, Hypothesis::H2);
  std::vector<Observation> rev;
  for (auto o : obs) rev.push_back({4 - o.rating, o.condition});
  const auto h1_rev = fit_sdt(rev, Hypothesis::H1);
  for (double s : {-2.0, -0.4, 0.0, 0.3, 1.5}) {
    for (auto c : {Condition::Human, Condition::AI}) {
      EXPECT_EQ(predict(s, c, h2), 4 - predict(s, c, h1_rev));
    }
  }
}

TEST(Predict, MonotoneInSignalStrength) {
  Rng rng(2024);
  int violations = 0;
  for (int rep = 0; rep < 10000; ++rep) {
    std::vector<Observation> obs;
    const std::size_t n = 2 + rng.below(30);
    for (std::size_t i = 0; i < n; ++i) {
      obs.push_back({1 + static_cast<int>(rng.below(3)),
                     i % 2 ? Condition::Human : Condition::AI});
    }
    const auto hyp = rng.below(2) ? Hypothesis::H1 : Hypothesis::H2;
    const auto model = fit_sdt(obs, hyp);
    const auto cond = rng.below(2) ? Condition::Human : Condition::AI;
    double a = 6.0 * rng.uniform() - 3.0, b = 6.0 * rng.uniform() - 3.0;
    if (a > b) std::swap(a, b);
    const int pa = predict(a, cond, model), pb = predict(b, cond, model);
    if (hyp == Hypothesis::H1 ? pa > pb : pa < pb) ++violations;
  }
  EXPECT_EQ(violations, 0);
}
