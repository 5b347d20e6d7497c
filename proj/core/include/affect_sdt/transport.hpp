#pragma once

// Exact discrete optimal transport (the transportation LP), used by the word
// mover's and word rotator's distances.

#include <Eigen/Dense>

namespace affect_sdt {

struct TransportProblem {
  Eigen::VectorXd source;  // masses, non-negative, sum 1
  Eigen::VectorXd target;  // masses, non-negative, sum 1
  Eigen::MatrixXd cost;    // source.size() x target.size(), non-negative
};

struct TransportSolution {
  double cost = 0.0;
  Eigen::MatrixXd plan;  // marginals equal the masses
};

// Transportation simplex: north-west corner start, MODI potentials, Dantzig
// entering rule with Bland's rule as an anti-cycling fallback. Throws
// DomainError on shape mismatch, negative entries or masses that do not sum
// to 1 within 1e-9.
TransportSolution solve_transport(const TransportProblem& problem);

}  // namespace affect_sdt
