#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "affect_sdt/error.hpp"
#include "affect_sdt/rng.hpp"
#include "affect_sdt/stats.hpp"
#include "oracles.hpp"

using namespace affect_sdt;

namespace {

using oracle::mann_whitney_p;
using oracle::wilcoxon_p;

constexpr Tail kTails[] = {Tail::OneGreater, Tail::OneLess, Tail::Two};

}  // namespace

TEST(MidRanks, TiesShareTheAverage) {
  const std::vector<double> x{3.0, 1.0, 3.0, 2.0, 3.0};
  EXPECT_EQ(mid_ranks(x), (std::vector<double>{4.0, 1.0, 4.0, 2.0, 4.0}));
}

TEST(Spearman, MatchesRankDifferenceFormulaWithoutTies) {
  Rng rng(11);
  for (int rep = 0; rep < 200; ++rep) {
    const std::size_t n = 3 + rng.below(30);
    std::vector<double> x(n), y(n);
    std::iota(x.begin(), x.end(), 1.0);
    std::iota(y.begin(), y.end(), 1.0);
    rng.shuffle(x.begin(), x.end());
    rng.shuffle(y.begin(), y.end());
    double d2 = 0;
    for (std::size_t i = 0; i < n; ++i) d2 += (x[i] - y[i]) * (x[i] - y[i]);
    const double nn = static_cast<double>(n);
    EXPECT_NEAR(spearman(x, y), 1.0 - 6.0 * d2 / (nn * (nn * nn - 1.0)), 1e-12);
  }
}

TEST(Spearman, TwoTailedPMatchesReference) {
  const std::vector<double> x{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  const std::vector<double> y{2, 1, 4, 3, 6, 5, 8, 7, 10, 9};
  const double rho = spearman(x, y);
  EXPECT_NEAR(rho, 0.9393939393939393, 1e-12);
  EXPECT_NEAR(spearman_p_two_tailed(rho, 10), 5.484052998513666e-05, 1e-10);
}

TEST(Pearson, ConstantInputIsDegenerate) {
  const std::vector<double> x{1, 1, 1}, y{1, 2, 3};
  EXPECT_THROW(pearson(x, y), DegenerateError);
}

TEST(WilcoxonExact, EveryRankSignPatternUpToTen) {
  for (std::size_t n = 1; n <= 10; ++n) {
    for (std::size_t mask = 0; mask < (std::size_t{1} << n); ++mask) {
      std::vector<double> x(n);
      for (std::size_t i = 0; i < n; ++i) {
        x[i] = static_cast<double>(i + 1) * ((mask >> i & 1) ? 1.0 : -1.0);
      }
      for (auto tail : kTails) {
        const auto r = wilcoxon_signed_rank(x, 0.0, tail);
        ASSERT_EQ(r.method, TestMethod::Exact);
        ASSERT_NEAR(r.p, wilcoxon_p(x, tail), 1e-12) << "n=" << n << " mask=" << mask;
      }
    }
  }
}

TEST(WilcoxonExact, TiedAndZeroDifferences) {
  Rng rng(3);
  for (int rep = 0; rep < 3000; ++rep) {
    const std::size_t n = 1 + rng.below(10);
    std::vector<double> x(n);
    for (auto& v : x) v = static_cast<double>(static_cast<int>(rng.below(7)) - 3);
    if (std::all_of(x.begin(), x.end(), [](double v) { return v == 0.0; })) {
      EXPECT_THROW(wilcoxon_signed_rank(x, 0.0, Tail::Two), DegenerateError);
      continue;
    }
    for (auto tail : kTails) {
      ASSERT_NEAR(wilcoxon_signed_rank(x, 0.0, tail).p, wilcoxon_p(x, tail), 1e-12);
    }
  }
}

TEST(WilcoxonExact, ShiftedNullValue) {
  const std::vector<double> x{0.7, 0.2, 0.9, 0.4, 0.65};
  std::vector<double> shifted;
  for (double v : x) shifted.push_back(v - 0.5);
  EXPECT_DOUBLE_EQ(wilcoxon_signed_rank(x, 0.5, Tail::OneGreater).p,
                   wilcoxon_p(shifted, Tail::OneGreater));
}

TEST(WilcoxonExact, MatchesReference) {
  const std::vector<double> x{0.5, -1.2, 2.3, 1.7, -0.4, 3.1, 0.9};
  EXPECT_NEAR(wilcoxon_signed_rank(x, 0.0, Tail::Two).p, 0.15625, 1e-12);
}

TEST(WilcoxonApprox, MatchesReference) {
  const std::vector<double> x{1.5,  -0.3, 2.2,  0.7, -1.1, 3.0,  0.4,  1.9, -0.6, 2.8,
                              0.9,  1.2,  -0.2, 2.5, 0.1,  1.7,  -0.9, 2.0, 0.6,  1.1,
                              1.3,  -0.4, 2.6,  0.8, 1.45, -0.05, 2.15, 0.35, 1.95, -0.75};
  WilcoxonOptions o;
  o.force_approx = true;
  const auto two = wilcoxon_signed_rank(x, 0.0, Tail::Two, o);
  EXPECT_EQ(two.method, TestMethod::Approx);
  EXPECT_NEAR(two.p, 0.0005081613959937616, 1e-12);
  EXPECT_NEAR(wilcoxon_signed_rank(x, 0.0, Tail::OneGreater, o).p, 0.0002540806979968808, 1e-12);
}

TEST(MannWhitneyExact, EveryOrderingUpToTenObservations) {
  for (std::size_t n = 2; n <= 10; ++n) {
    for (std::size_t mask = 1; mask + 1 < (std::size_t{1} << n); ++mask) {
      std::vector<double> x, y;
      for (std::size_t i = 0; i < n; ++i) ((mask >> i & 1) ? x : y).push_back(double(i));
      for (auto tail : kTails) {
        const auto r = mann_whitney_u(x, y, tail);
        ASSERT_EQ(r.method, TestMethod::Exact);
        ASSERT_NEAR(r.p, mann_whitney_p(x, y, tail), 1e-12) << "n=" << n << " mask=" << mask;
      }
    }
  }
}

TEST(MannWhitneyExact, TiedSamples) {
  Rng rng(5);
  for (int rep = 0; rep < 2000; ++rep) {
    const std::size_t nx = 1 + rng.below(6), ny = 1 + rng.below(10 - nx);
    std::vector<double> x(nx), y(ny);
    for (auto& v : x) v = double(rng.below(4));
    for (auto& v : y) v = double(rng.below(4));
    for (auto tail : kTails) {
      ASSERT_NEAR(mann_whitney_u(x, y, tail).p, mann_whitney_p(x, y, tail), 1e-12);
    }
  }
}

TEST(MannWhitneyApprox, MatchesReference) {
  const std::vector<double> a{3.1, 2.2, 4.5, 1.9, 5.0, 3.3, 2.8, 4.1, 3.9, 2.5, 4.4, 3.0};
  const std::vector<double> b{2.0, 1.5, 3.2, 2.7, 1.1, 2.4, 3.6, 1.8, 2.9, 1.2, 2.1};
  const auto two = mann_whitney_u(a, b, Tail::Two);
  EXPECT_EQ(two.method, TestMethod::Approx);
  EXPECT_DOUBLE_EQ(two.statistic, 108.0);
  EXPECT_NEAR(two.p, 0.010644786560634337, 1e-12);
  EXPECT_NEAR(mann_whitney_u(a, b, Tail::OneLess).p, 0.9955476863951409, 1e-12);
}

TEST(PermutationTest, AddOneCorrectionBounds) {
  const std::vector<double> x{1, 2, 3, 4, 5, 6, 7, 8};
  const auto r = perm_test_rho(x, x, 999, Tail::OneGreater, 1);
  EXPECT_DOUBLE_EQ(r.statistic, 1.0);
  EXPECT_GE(r.p, 1.0 / 1000.0);
  EXPECT_LT(r.p, 0.01);
}

TEST(PermutationTest, SameSeedSameP) {
  Rng rng(9);
  std::vector<double> x(15), y(15);
  for (auto& v : x) v = rng.normal();
  for (auto& v : y) v = rng.normal();
  EXPECT_EQ(perm_test_rho(x, y, 500, Tail::Two, 42).p, perm_test_rho(x, y, 500, Tail::Two, 42).p);
}

TEST(Bootstrap, IntervalBracketsTheMeanAndIsReproducible) {
  Rng rng(21);
  std::vector<double> x(40);
  for (auto& v : x) v = rng.normal() + 2.0;
  const auto ci = bootstrap_ci(x, 0.95, 2000, 8);
  EXPECT_LT(ci.first, mean(x));
  EXPECT_GT(ci.second, mean(x));
  EXPECT_EQ(ci, bootstrap_ci(x, 0.95, 2000, 8));
}

TEST(Quantile, TypeSevenInterpolation) {
  const std::vector<double> s{1, 2, 3, 4};
  EXPECT_DOUBLE_EQ(quantile_sorted(s, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(quantile_sorted(s, 1.0), 4.0);
  EXPECT_DOUBLE_EQ(quantile_sorted(s, 1.0 / 3.0), 2.0);
  EXPECT_DOUBLE_EQ(quantile_sorted(s, 0.5), 2.5);
}

TEST(SampleSd, UsesNMinusOne) {
  const std::vector<double> x{2, 4, 4, 4, 5, 5, 7, 9};
  EXPECT_NEAR(sample_sd(x), std::sqrt(32.0 / 7.0), 1e-12);
}

TEST(PermutationTest, NullPValuesAreUniform) {
  Rng rng(77);
  std::vector<double> ps;
  for (int rep = 0; rep < 2000; ++rep) {
    std::vector<double> x(20), y(20);
    for (auto& v : x) v = rng.normal();
    for (auto& v : y) v = rng.normal();
    ps.push_back(perm_test_rho(x, y, 999, Tail::OneGreater, derive_seed(77, rep)).p);
  }
  EXPECT_GT(oracle::ks_uniform_p(ps), 0.01);
}
