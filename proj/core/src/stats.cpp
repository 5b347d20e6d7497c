#include "affect_sdt/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include <boost/math/distributions/students_t.hpp>

#include "affect_sdt/error.hpp"
#include "affect_sdt/rng.hpp"

namespace affect_sdt {

namespace {

// Resampling loops draw from one derived stream per block of this many
// iterations, so splitting work across threads never changes the result.
constexpr std::size_t kBlock = 256;

constexpr double kTieTolerance = 1e-12;

double clamp_p(double p) {
  if (!(p > 0.0)) return std::numeric_limits<double>::min();
  return std::min(p, 1.0);
}

// Ranks doubled so ties (x.5) become integers.
std::vector<long> doubled_ranks(std::span<const double> x) {
  const auto r = mid_ranks(x);
  std::vector<long> out(r.size());
  for (std::size_t i = 0; i < r.size(); ++i) out[i] = std::lround(2.0 * r[i]);
  return out;
}

// Sum over tie groups of t^3 - t.
double tie_term(std::span<const double> values) {
  std::vector<double> s(values.begin(), values.end());
  std::sort(s.begin(), s.end());
  double term = 0.0;
  for (std::size_t i = 0; i < s.size();) {
    std::size_t j = i + 1;
    while (j < s.size() && s[j] == s[i]) ++j;
    const double t = static_cast<double>(j - i);
    term += t * t * t - t;
    i = j;
  }
  return term;
}

// p-value from a normal approximation; the continuity correction follows R's
// convention (toward the null for the tested direction).
std::pair<double, double> normal_tail(double stat, double mu, double sd, Tail tail, bool cc) {
  const double delta = stat - mu;
  double correction = 0.0;
  if (cc) {
    switch (tail) {
      case Tail::OneGreater: correction = 0.5; break;
      case Tail::OneLess: correction = -0.5; break;
      case Tail::Two: correction = delta > 0 ? 0.5 : (delta < 0 ? -0.5 : 0.0); break;
    }
  }
  const double z = (delta - correction) / sd;
  double p = 1.0;
  switch (tail) {
    case Tail::OneGreater: p = 0.5 * std::erfc(z / std::sqrt(2.0)); break;
    case Tail::OneLess: p = 0.5 * std::erfc(-z / std::sqrt(2.0)); break;
    case Tail::Two: p = std::erfc(std::abs(z) / std::sqrt(2.0)); break;
  }
  return {z, p};
}

double two_sided_from(double p_ge, double p_le) { return std::min(1.0, 2.0 * std::min(p_ge, p_le)); }

void require_same_size(std::span<const double> x, std::span<const double> y, const char* what) {
  if (x.size() != y.size()) {
    throw DomainError(std::string(what) + ": inputs differ in length (" +
                      std::to_string(x.size()) + " vs " + std::to_string(y.size()) + ")");
  }
  if (x.size() < 2) throw DomainError(std::string(what) + ": need at least 2 observations");
}

}  // namespace

std::string_view to_string(Tail t) {
  switch (t) {
    case Tail::OneGreater: return "one_greater";
    case Tail::OneLess: return "one_less";
    case Tail::Two: return "two";
  }
  return "?";
}

std::string_view to_string(TestMethod m) {
  switch (m) {
    case TestMethod::Exact: return "exact";
    case TestMethod::Approx: return "approx";
    case TestMethod::Permutation: return "permutation";
  }
  return "?";
}

std::vector<double> mid_ranks(std::span<const double> x) {
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> ranks(x.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i + 1;
    while (j < order.size() && x[order[j]] == x[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) ranks[order[k]] = avg;
    i = j;
  }
  return ranks;
}

double mean(std::span<const double> x) {
  if (x.empty()) throw DomainError("mean of empty sample");
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

double sample_sd(std::span<const double> x) {
  if (x.size() < 2) throw DomainError("sample sd needs at least 2 observations");
  const double m = mean(x);
  double ss = 0.0;
  for (double v : x) ss += (v - m) * (v - m);
  return std::sqrt(ss / static_cast<double>(x.size() - 1));
}

double pearson(std::span<const double> x, std::span<const double> y) {
  require_same_size(x, y, "pearson");
  const double mx = mean(x);
  const double my = mean(y);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx <= 0.0 || syy <= 0.0) throw DegenerateError("correlation undefined: constant input");
  const double r = sxy / std::sqrt(sxx * syy);
  return std::clamp(r, -1.0, 1.0);
}

double spearman(std::span<const double> x, std::span<const double> y) {
  require_same_size(x, y, "spearman");
  const auto rx = mid_ranks(x);
  const auto ry = mid_ranks(y);
  return pearson(rx, ry);
}

double spearman_p_two_tailed(double rho, std::size_t n) {
  if (n < 3) return 1.0;
  if (std::abs(rho) >= 1.0) return std::numeric_limits<double>::min();
  const double df = static_cast<double>(n - 2);
  const double t = rho * std::sqrt(df / ((1.0 - rho) * (1.0 + rho)));
  const boost::math::students_t dist(df);
  return clamp_p(2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t))));
}

TestResult perm_test_rho(std::span<const double> x, std::span<const double> y,
                         std::size_t n_iter, Tail tail, std::uint64_t seed) {
  const double observed = spearman(x, y);
  const std::size_t n = x.size();
  auto rx = mid_ranks(x);
  auto ry = mid_ranks(y);
  const double mx = mean(rx);
  const double my = mean(ry);
  double sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    rx[i] -= mx;
    ry[i] -= my;
    sxx += rx[i] * rx[i];
    syy += ry[i] * ry[i];
  }
  const double denom = std::sqrt(sxx * syy);

  std::size_t hits = 0;
  std::vector<double> perm(ry);
  for (std::size_t block = 0; block * kBlock < n_iter; ++block) {
    Rng rng(derive_seed(seed, block));
    const std::size_t stop = std::min(n_iter, (block + 1) * kBlock);
    for (std::size_t it = block * kBlock; it < stop; ++it) {
      std::copy(ry.begin(), ry.end(), perm.begin());
      rng.shuffle(perm.begin(), perm.end());
      double sxy = 0.0;
      for (std::size_t i = 0; i < n; ++i) sxy += rx[i] * perm[i];
      const double r = sxy / denom;
      bool hit = false;
      switch (tail) {
        case Tail::OneGreater: hit = r >= observed - kTieTolerance; break;
        case Tail::OneLess: hit = r <= observed + kTieTolerance; break;
        case Tail::Two: hit = std::abs(r) >= std::abs(observed) - kTieTolerance; break;
      }
      hits += hit ? 1 : 0;
    }
  }
  TestResult res;
  res.statistic = observed;
  res.p = clamp_p(static_cast<double>(1 + hits) / static_cast<double>(n_iter + 1));
  res.tail = tail;
  res.method = TestMethod::Permutation;
  res.n = n;
  return res;
}

TestResult wilcoxon_signed_rank(std::span<const double> x, double mu0, Tail tail,
                                const WilcoxonOptions& options) {
  std::vector<double> diffs;
  diffs.reserve(x.size());
  for (double v : x) {
    const double d = v - mu0;
    if (d != 0.0) diffs.push_back(d);
  }
  if (diffs.empty()) throw DegenerateError("wilcoxon: all differences are zero");
  const std::size_t n = diffs.size();

  std::vector<double> abs_d(n);
  for (std::size_t i = 0; i < n; ++i) abs_d[i] = std::abs(diffs[i]);
  const auto r2 = doubled_ranks(abs_d);
  long w2 = 0;  // doubled W+
  for (std::size_t i = 0; i < n; ++i) {
    if (diffs[i] > 0) w2 += r2[i];
  }

  TestResult res;
  res.statistic = 0.5 * static_cast<double>(w2);
  res.tail = tail;
  res.n = n;

  if (!options.force_approx && n <= options.exact_max_n) {
    // Null distribution of doubled W+ over all 2^n sign assignments.
    long total = 0;
    for (long r : r2) total += r;
    std::vector<double> count(static_cast<std::size_t>(total) + 1, 0.0);
    count[0] = 1.0;
    long reach = 0;
    for (long r : r2) {
      for (long s = reach; s >= 0; --s) {
        if (count[static_cast<std::size_t>(s)] != 0.0) {
          count[static_cast<std::size_t>(s + r)] += count[static_cast<std::size_t>(s)];
        }
      }
      reach += r;
    }
    const double all = std::ldexp(1.0, static_cast<int>(n));
    double ge = 0.0, le = 0.0;
    for (long s = 0; s <= total; ++s) {
      if (s >= w2) ge += count[static_cast<std::size_t>(s)];
      if (s <= w2) le += count[static_cast<std::size_t>(s)];
    }
    const double p_ge = ge / all;
    const double p_le = le / all;
    res.method = TestMethod::Exact;
    res.p = clamp_p(tail == Tail::OneGreater ? p_ge
                    : tail == Tail::OneLess  ? p_le
                                             : two_sided_from(p_ge, p_le));
    return res;
  }

  const double nn = static_cast<double>(n);
  const double mu = nn * (nn + 1.0) / 4.0;
  const double var = nn * (nn + 1.0) * (2.0 * nn + 1.0) / 24.0 - tie_term(abs_d) / 48.0;
  if (var <= 0.0) throw DegenerateError("wilcoxon: zero variance of W+");
  const auto [z, p] = normal_tail(res.statistic, mu, std::sqrt(var), tail,
                                  options.continuity_correction);
  res.method = TestMethod::Approx;
  res.z = z;
  res.p = clamp_p(p);
  return res;
}

TestResult mann_whitney_u(std::span<const double> x, std::span<const double> y, Tail tail,
                          const MannWhitneyOptions& options) {
  if (x.empty() || y.empty()) throw DomainError("mann_whitney_u: both samples must be non-empty");
  const std::size_t nx = x.size();
  const std::size_t ny = y.size();
  const std::size_t total_n = nx + ny;
  std::vector<double> pooled(x.begin(), x.end());
  pooled.insert(pooled.end(), y.begin(), y.end());
  const auto r2 = doubled_ranks(pooled);
  long rx2 = 0;
  for (std::size_t i = 0; i < nx; ++i) rx2 += r2[i];
  const long offset2 = static_cast<long>(nx * (nx + 1));  // doubled n_x(n_x+1)/2

  TestResult res;
  res.statistic = 0.5 * static_cast<double>(rx2 - offset2);
  res.tail = tail;
  res.n = total_n;

  if (total_n <= options.exact_max_total) {
    // ways[c][s]: subsets of size c with doubled rank sum s.
    long max_sum = 0;
    for (long r : r2) max_sum += r;
    const auto width = static_cast<std::size_t>(max_sum) + 1;
    std::vector<std::vector<double>> ways(nx + 1, std::vector<double>(width, 0.0));
    ways[0][0] = 1.0;
    for (std::size_t item = 0; item < total_n; ++item) {
      const long r = r2[item];
      for (std::size_t c = std::min(nx, item + 1); c >= 1; --c) {
        auto& dst = ways[c];
        const auto& src = ways[c - 1];
        for (long s = max_sum - r; s >= 0; --s) {
          if (src[static_cast<std::size_t>(s)] != 0.0) {
            dst[static_cast<std::size_t>(s + r)] += src[static_cast<std::size_t>(s)];
          }
        }
      }
    }
    double all = 0.0, ge = 0.0, le = 0.0;
    for (long s = 0; s <= max_sum; ++s) {
      const double w = ways[nx][static_cast<std::size_t>(s)];
      all += w;
      if (s >= rx2) ge += w;
      if (s <= rx2) le += w;
    }
    const double p_ge = ge / all;
    const double p_le = le / all;
    res.method = TestMethod::Exact;
    res.p = clamp_p(tail == Tail::OneGreater ? p_ge
                    : tail == Tail::OneLess  ? p_le
                                             : two_sided_from(p_ge, p_le));
    return res;
  }

  const double n1 = static_cast<double>(nx);
  const double n2 = static_cast<double>(ny);
  const double nt = n1 + n2;
  const double mu = n1 * n2 / 2.0;
  const double var = n1 * n2 / 12.0 * ((nt + 1.0) - tie_term(pooled) / (nt * (nt - 1.0)));
  res.method = TestMethod::Approx;
  if (var <= 0.0) {
    // Every observation tied: no evidence either way.
    res.p = 1.0;
    return res;
  }
  const auto [z, p] = normal_tail(res.statistic, mu, std::sqrt(var), tail,
                                  options.continuity_correction);
  res.z = z;
  res.p = clamp_p(p);
  return res;
}

double quantile_sorted(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw DomainError("quantile of empty sample");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * std::clamp(q, 0.0, 1.0);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= sorted.size()) return sorted.back();
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[lo + 1] - sorted[lo]);
}

std::pair<double, double> bootstrap_ci(std::span<const double> x, double level,
                                       std::size_t n_iter, std::uint64_t seed) {
  if (x.size() < 2) throw DomainError("bootstrap_ci: need at least 2 observations");
  if (!(level > 0.0 && level < 1.0)) throw DomainError("bootstrap_ci: level must be in (0, 1)");
  if (n_iter == 0) throw DomainError("bootstrap_ci: n_iter must be positive");
  const std::size_t n = x.size();
  std::vector<double> means(n_iter);
  for (std::size_t block = 0; block * kBlock < n_iter; ++block) {
    Rng rng(derive_seed(seed, block));
    const std::size_t stop = std::min(n_iter, (block + 1) * kBlock);
    for (std::size_t it = block * kBlock; it < stop; ++it) {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) s += x[rng.below(n)];
      means[it] = s / static_cast<double>(n);
    }
  }
  std::sort(means.begin(), means.end());
  const double alpha = 1.0 - level;
  return {quantile_sorted(means, alpha / 2.0), quantile_sorted(means, 1.0 - alpha / 2.0)};
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

}  // namespace affect_sdt
