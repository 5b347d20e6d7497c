#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "affect_sdt/affect.hpp"
#include "affect_sdt/error.hpp"
#include "affect_sdt/harness.hpp"
#include "affect_sdt/parallel.hpp"
#include "affect_sdt/rng.hpp"
#include "affect_sdt/stats.hpp"

namespace affect_sdt {

namespace {

bool constant(std::span<const int> v) {
  return std::adjacent_find(v.begin(), v.end(), std::not_equal_to<>()) == v.end();
}

std::vector<Eigen::VectorXd> knn_features(const StudyDataset& ds, const KnnOptions& knn) {
  std::vector<Eigen::VectorXd> out;
  for (const auto& t : ds) {
    if (knn.phase == KnnPhase::Pre) {
      out.push_back(score_vector(t, knn.component, Phase::Pre));
    } else if (knn.phase == KnnPhase::Post) {
      out.push_back(score_vector(t, knn.component, Phase::Post));
    } else {
      const auto a = score_vector(t, knn.component, Phase::Pre);
      const auto b = score_vector(t, knn.component, Phase::Post);
      Eigen::VectorXd v(a.size() + b.size());
      v << a, b;
      out.push_back(std::move(v));
    }
  }
  return out;
}

int knn_vote(const std::vector<Eigen::VectorXd>& x, std::span<const int> ratings,
             std::span<const std::size_t> train, std::size_t query, int k) {
  std::vector<std::pair<double, std::size_t>> d;
  d.reserve(train.size());
  for (auto i : train) d.emplace_back((x[i] - x[query]).squaredNorm(), i);
  const auto kk = static_cast<std::size_t>(k);
  std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(kk), d.end());
  std::array<int, 3> votes{};
  for (std::size_t r = 0; r < kk; ++r) ++votes[static_cast<std::size_t>(ratings[d[r].second] - 1)];
  const int top = *std::max_element(votes.begin(), votes.end());
  for (std::size_t r = 0; r < kk; ++r) {
    const int label = ratings[d[r].second];
    if (votes[static_cast<std::size_t>(label - 1)] == top) return label;
  }
  return ratings[d.front().second];
}

}  // namespace

std::string_view to_string(KnnPhase p) {
  switch (p) {
    case KnnPhase::Pre: return "pre";
    case KnnPhase::Post: return "post";
    case KnnPhase::Both: return "both";
  }
  return "both";
}

std::optional<KnnPhase> parse_knn_phase(std::string_view s) {
  if (s == "pre") return KnnPhase::Pre;
  if (s == "post") return KnnPhase::Post;
  if (s == "both") return KnnPhase::Both;
  return std::nullopt;
}

EvaluationReport run_baseline(Family baseline, const StudyDataset& dataset,
                              const HarnessOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  const std::size_t n = dataset.size();
  EvaluationReport r;
  r.seed = options.seed;
  r.predictions.resize(n);
  r.ratings.resize(n);
  r.signal.assign(n, std::numeric_limits<double>::quiet_NaN());
  r.chosen.assign(n, std::string(to_string(baseline)));
  for (std::size_t k = 0; k < n; ++k) r.ratings[k] = dataset[k].rating;
  for (std::size_t k = 0; k < n; ++k) {
    Rng rng(derive_seed(options.seed, 0x62617365ULL, k));
    switch (baseline) {
      case Family::Random:
        r.predictions[k] = 1 + static_cast<int>(rng.below(3));
        break;
      case Family::Probability: {
        if (n < 2) throw DomainError("Probability baseline needs at least two trials");
        std::size_t pick = rng.below(n - 1);
        if (pick >= k) ++pick;
        r.predictions[k] = r.ratings[pick];
        break;
      }
      case Family::Detective:
        r.predictions[k] = dataset[k].condition == Condition::Human ? 3 : 1;
        break;
      default:
        throw DomainError("run_baseline: " + std::string(to_string(baseline)) +
                          " is not a naive baseline");
    }
  }
  score_report(r, options.n_perm, options.seed);
  r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

EvaluationReport knn_baseline(const StudyDataset& dataset, const KnnOptions& knn,
                              const HarnessOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  const std::size_t n = dataset.size();
  if (knn.k_grid.empty()) throw DomainError("knn_baseline: empty k grid");
  std::vector<int> ks = knn.k_grid;
  std::sort(ks.begin(), ks.end());
  ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
  for (int k : ks) {
    if (k < 1 || k % 2 == 0 || static_cast<std::size_t>(k) + 2 > n) {
      throw DomainError("knn_baseline: k = " + std::to_string(k) +
                        " must be odd and at most N - 2 = " +
                        std::to_string(static_cast<long long>(n) - 2));
    }
  }
  const auto x = knn_features(dataset, knn);
  EvaluationReport r;
  r.seed = options.seed;
  r.ratings.resize(n);
  for (std::size_t i = 0; i < n; ++i) r.ratings[i] = dataset[i].rating;
  r.predictions.assign(n, 0);
  r.signal.assign(n, std::numeric_limits<double>::quiet_NaN());
  r.chosen.assign(n, std::string());

  parallel_for(n, options.jobs, [&](std::size_t held) {
    std::vector<std::size_t> train;
    for (std::size_t i = 0; i < n; ++i) {
      if (i != held) train.push_back(i);
    }
    std::vector<int> obs;
    for (auto i : train) obs.push_back(r.ratings[i]);
    std::size_t best = 0;
    double best_score = -std::numeric_limits<double>::infinity();
    for (std::size_t q = 0; q < ks.size(); ++q) {
      std::vector<int> pred;
      for (std::size_t jj = 0; jj < train.size(); ++jj) {
        std::vector<std::size_t> t;
        for (auto i : train) {
          if (i != train[jj]) t.push_back(i);
        }
        pred.push_back(knn_vote(x, r.ratings, t, train[jj], ks[q]));
      }
      double score = 0.0;
      if (!constant(pred) && !constant(obs)) {
        std::vector<double> a(pred.begin(), pred.end()), b(obs.begin(), obs.end());
        score = spearman(a, b);
      }
      if (score > best_score) {
        best_score = score;
        best = q;
      }
    }
    r.predictions[held] = knn_vote(x, r.ratings, train, held, ks[best]);
    r.chosen[held] = "KNN|k=" + std::to_string(ks[best]);
  });

  score_report(r, options.n_perm, options.seed);
  r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

}  // namespace affect_sdt
