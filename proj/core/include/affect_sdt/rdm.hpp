#pragma once

// Representational dissimilarity matrices and their second-order comparison.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "affect_sdt/corpus.hpp"
#include "affect_sdt/stats.hpp"

namespace affect_sdt {

// Square, symmetric, non-negative, zero diagonal.
struct Rdm {
  Eigen::MatrixXd values;
  std::vector<std::string> labels;

  std::size_t size() const { return static_cast<std::size_t>(values.rows()); }
  // Strictly-lower-triangle cells, row-major.
  std::vector<double> lower_triangle() const;
};

// RDM[i][j] = |values_i - values_j|. Labels default to the indices.
Rdm build_rdm(std::span<const double> values, std::vector<std::string> labels = {});

// Spearman rho over the lower triangles; one-tailed (greater) p from jointly
// permuting rows and columns of `a`.
TestResult compare_rdms(const Rdm& a, const Rdm& b, std::size_t n_perm, std::uint64_t seed);

// Six group means (stage 1..3 x Human/AI, in that order) turned into an RDM of
// absolute differences. Throws DomainError if a group is empty.
Rdm condition_rdm(std::span<const double> values, std::span<const int> stages,
                  std::span<const Condition> conditions);

}  // namespace affect_sdt
