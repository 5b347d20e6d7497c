#pragma once

// Nonparametric statistics: rank correlation, permutation tests, the
// Wilcoxon signed-rank and Mann-Whitney U tests, and bootstrap intervals.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

namespace affect_sdt {

enum class Tail { OneGreater, OneLess, Two };
enum class TestMethod { Exact, Approx, Permutation };

std::string_view to_string(Tail t);
std::string_view to_string(TestMethod m);

struct TestResult {
  double statistic = 0.0;
  double p = 1.0;
  Tail tail = Tail::Two;
  TestMethod method = TestMethod::Exact;
  std::size_t n = 0;
  // Standardized statistic for approximate tests (0 for exact ones).
  double z = 0.0;
};

// Mid-ranks (1-based, ties share the average rank).
std::vector<double> mid_ranks(std::span<const double> x);

// Pearson correlation. Throws DegenerateError if either input is constant.
double pearson(std::span<const double> x, std::span<const double> y);

// Spearman rho as the Pearson correlation of mid-ranks.
double spearman(std::span<const double> x, std::span<const double> y);

// Two-tailed p of Spearman rho via the t approximation with n-2 df.
double spearman_p_two_tailed(double rho, std::size_t n);

// Permutation test of Spearman rho; y is shuffled. p is add-one corrected:
// (1 + #{perm >= observed}) / (n_iter + 1) for OneGreater.
TestResult perm_test_rho(std::span<const double> x, std::span<const double> y,
                         std::size_t n_iter, Tail tail, std::uint64_t seed);

struct WilcoxonOptions {
  std::size_t exact_max_n = 25;    // exact null distribution up to this n
  bool continuity_correction = true;
  bool force_approx = false;
};

// One-sample (or paired, with x = post - pre and mu0 = 0) signed-rank test.
// Zero differences are dropped. The statistic is W+, the rank sum of positive
// differences. Throws DegenerateError when every difference is zero.
TestResult wilcoxon_signed_rank(std::span<const double> x, double mu0, Tail tail,
                                const WilcoxonOptions& options = {});

struct MannWhitneyOptions {
  std::size_t exact_max_total = 20;  // exact when n_x + n_y <= this
  bool continuity_correction = true;
};

// Two-sample rank-sum test. The statistic is U of the first sample; OneLess
// means x tends to be smaller than y.
TestResult mann_whitney_u(std::span<const double> x, std::span<const double> y, Tail tail,
                          const MannWhitneyOptions& options = {});

// Percentile bootstrap interval of the mean.
std::pair<double, double> bootstrap_ci(std::span<const double> x, double level,
                                       std::size_t n_iter, std::uint64_t seed);

double mean(std::span<const double> x);
// Sample standard deviation (n - 1 denominator).
double sample_sd(std::span<const double> x);
// Linear-interpolation quantile of a sorted sample (R type 7).
double quantile_sorted(std::span<const double> sorted, double q);

double normal_cdf(double z);

}  // namespace affect_sdt
