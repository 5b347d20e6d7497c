#include "affect_sdt/rdm.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include "affect_sdt/error.hpp"
#include "affect_sdt/rng.hpp"

namespace affect_sdt {

namespace {
constexpr std::size_t kBlock = 256;
}

std::vector<double> Rdm::lower_triangle() const {
  std::vector<double> cells;
  const auto n = values.rows();
  cells.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
  for (Eigen::Index i = 1; i < n; ++i) {
    for (Eigen::Index j = 0; j < i; ++j) cells.push_back(values(i, j));
  }
  return cells;
}

Rdm build_rdm(std::span<const double> values, std::vector<std::string> labels) {
  if (values.size() < 2) throw DomainError("build_rdm: need at least 2 values");
  const auto n = static_cast<Eigen::Index>(values.size());
  Rdm rdm;
  rdm.values = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < i; ++j) {
      const double d = std::abs(values[static_cast<std::size_t>(i)] -
                                values[static_cast<std::size_t>(j)]);
      rdm.values(i, j) = d;
      rdm.values(j, i) = d;
    }
  }
  if (labels.empty()) {
    for (std::size_t i = 0; i < values.size(); ++i) labels.push_back(std::to_string(i));
  }
  if (labels.size() != values.size()) throw DomainError("build_rdm: label count mismatch");
  rdm.labels = std::move(labels);
  return rdm;
}

TestResult compare_rdms(const Rdm& a, const Rdm& b, std::size_t n_perm, std::uint64_t seed) {
  if (a.size() != b.size()) throw DomainError("compare_rdms: RDMs differ in size");
  if (a.size() < 3) throw DomainError("compare_rdms: need at least 3 conditions");
  const auto cells_a = a.lower_triangle();
  const auto cells_b = b.lower_triangle();
  const double observed = spearman(cells_a, cells_b);

  // Permuting a's rows and columns only reorders its cell values, so ranks
  // can be computed once and permuted alongside.
  const auto n = static_cast<Eigen::Index>(a.size());
  const auto ra_cells = mid_ranks(cells_a);
  const auto rb_cells = mid_ranks(cells_b);
  Eigen::MatrixXd ra = Eigen::MatrixXd::Zero(n, n);
  {
    std::size_t k = 0;
    for (Eigen::Index i = 1; i < n; ++i) {
      for (Eigen::Index j = 0; j < i; ++j) {
        ra(i, j) = ra_cells[k];
        ra(j, i) = ra_cells[k];
        ++k;
      }
    }
  }
  const double ma = mean(ra_cells);
  const double mb = mean(rb_cells);
  double saa = 0.0, sbb = 0.0;
  for (std::size_t k = 0; k < ra_cells.size(); ++k) {
    saa += (ra_cells[k] - ma) * (ra_cells[k] - ma);
    sbb += (rb_cells[k] - mb) * (rb_cells[k] - mb);
  }
  const double denom = std::sqrt(saa * sbb);

  std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));
  std::size_t hits = 0;
  for (std::size_t block = 0; block * kBlock < n_perm; ++block) {
    Rng rng(derive_seed(seed, block));
    const std::size_t stop = std::min(n_perm, (block + 1) * kBlock);
    for (std::size_t it = block * kBlock; it < stop; ++it) {
      std::iota(perm.begin(), perm.end(), Eigen::Index{0});
      rng.shuffle(perm.begin(), perm.end());
      double sab = 0.0;
      std::size_t k = 0;
      for (Eigen::Index i = 1; i < n; ++i) {
        for (Eigen::Index j = 0; j < i; ++j) {
          sab += (ra(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]) - ma) *
                 (rb_cells[k] - mb);
          ++k;
        }
      }
      if (sab / denom >= observed - 1e-12) ++hits;
    }
  }
  TestResult res;
  res.statistic = observed;
  res.p = static_cast<double>(1 + hits) / static_cast<double>(n_perm + 1);
  res.tail = Tail::OneGreater;
  res.method = TestMethod::Permutation;
  res.n = cells_a.size();
  return res;
}

Rdm condition_rdm(std::span<const double> values, std::span<const int> stages,
                  std::span<const Condition> conditions) {
  if (values.size() != stages.size() || values.size() != conditions.size()) {
    throw DomainError("condition_rdm: input lengths differ");
  }
  std::array<double, 6> sum{};
  std::array<std::size_t, 6> count{};
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (stages[i] < 1 || stages[i] > 3) throw DomainError("condition_rdm: stage out of range");
    const auto g = static_cast<std::size_t>((stages[i] - 1) * 2 +
                                            (conditions[i] == Condition::Human ? 0 : 1));
    sum[g] += values[i];
    ++count[g];
  }
  std::array<double, 6> means{};
  std::vector<std::string> labels;
  for (std::size_t g = 0; g < 6; ++g) {
    const std::string label = "stage" + std::to_string(g / 2 + 1) + "-" +
                              (g % 2 == 0 ? "human" : "ai");
    if (count[g] == 0) throw DomainError("condition_rdm: empty group " + label);
    means[g] = sum[g] / static_cast<double>(count[g]);
    labels.push_back(label);
  }
  return build_rdm(means, std::move(labels));
}

}  // namespace affect_sdt
