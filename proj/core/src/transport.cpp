#include "affect_sdt/transport.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "affect_sdt/error.hpp"

namespace affect_sdt {

namespace {

struct Cell {
  std::size_t row;
  std::size_t col;
  double flow;
};

// Basis of the transportation simplex: m + n - 1 cells forming a spanning tree
// over the bipartite graph of rows and columns.
class Basis {
 public:
  Basis(std::size_t m, std::size_t n) : m_(m), n_(n), is_basic_(m * n, false) {}

  void add(std::size_t i, std::size_t j, double flow) {
    cells_.push_back({i, j, flow});
    is_basic_[i * n_ + j] = true;
  }

  void remove(std::size_t k) {
    is_basic_[cells_[k].row * n_ + cells_[k].col] = false;
    cells_.erase(cells_.begin() + static_cast<std::ptrdiff_t>(k));
  }

  bool basic(std::size_t i, std::size_t j) const { return is_basic_[i * n_ + j]; }
  std::vector<Cell>& cells() { return cells_; }
  const std::vector<Cell>& cells() const { return cells_; }

  // u_i + v_j = c_ij on every basic cell, u_0 = 0.
  void potentials(const Eigen::MatrixXd& cost, std::vector<double>& u,
                  std::vector<double>& v) const {
    u.assign(m_, std::numeric_limits<double>::quiet_NaN());
    v.assign(n_, std::numeric_limits<double>::quiet_NaN());
    u[0] = 0.0;
    std::size_t assigned = 1;
    const std::size_t needed = m_ + n_;
    // The tree has m + n nodes; sweep until all potentials are fixed.
    while (assigned < needed) {
      bool progress = false;
      for (const auto& c : cells_) {
        const bool hu = !std::isnan(u[c.row]);
        const bool hv = !std::isnan(v[c.col]);
        if (hu && !hv) {
          v[c.col] = cost(static_cast<Eigen::Index>(c.row), static_cast<Eigen::Index>(c.col)) -
                     u[c.row];
          ++assigned;
          progress = true;
        } else if (!hu && hv) {
          u[c.row] = cost(static_cast<Eigen::Index>(c.row), static_cast<Eigen::Index>(c.col)) -
                     v[c.col];
          ++assigned;
          progress = true;
        }
      }
      if (!progress) throw DomainError("solve_transport: basis is not a spanning tree");
    }
  }

  // Basic-cell indices along the tree path from row `from_row` to column
  // `to_col`, in order starting at the row end.
  std::vector<std::size_t> path(std::size_t from_row, std::size_t to_col) const {
    // Nodes: rows 0..m-1, columns m..m+n-1.
    const std::size_t nodes = m_ + n_;
    std::vector<std::vector<std::size_t>> adjacent(nodes);
    for (std::size_t k = 0; k < cells_.size(); ++k) {
      adjacent[cells_[k].row].push_back(k);
      adjacent[m_ + cells_[k].col].push_back(k);
    }
    std::vector<std::ptrdiff_t> via(nodes, -1);
    std::vector<bool> seen(nodes, false);
    std::vector<std::size_t> queue{from_row};
    seen[from_row] = true;
    for (std::size_t head = 0; head < queue.size(); ++head) {
      const std::size_t node = queue[head];
      for (std::size_t k : adjacent[node]) {
        const std::size_t other = node < m_ ? m_ + cells_[k].col : cells_[k].row;
        if (seen[other]) continue;
        seen[other] = true;
        via[other] = static_cast<std::ptrdiff_t>(k);
        queue.push_back(other);
      }
    }
    const std::size_t target = m_ + to_col;
    if (!seen[target]) throw DomainError("solve_transport: disconnected basis");
    std::vector<std::size_t> edges;
    std::size_t node = target;
    while (node != from_row) {
      const auto k = static_cast<std::size_t>(via[node]);
      edges.push_back(k);
      node = node < m_ ? m_ + cells_[k].col : cells_[k].row;
    }
    std::reverse(edges.begin(), edges.end());
    return edges;
  }

 private:
  std::size_t m_;
  std::size_t n_;
  std::vector<bool> is_basic_;
  std::vector<Cell> cells_;
};

void validate(const TransportProblem& p) {
  const auto m = p.source.size();
  const auto n = p.target.size();
  if (m == 0 || n == 0) throw DomainError("solve_transport: empty mass vector");
  if (p.cost.rows() != m || p.cost.cols() != n) {
    throw DomainError("solve_transport: cost matrix is " + std::to_string(p.cost.rows()) + "x" +
                      std::to_string(p.cost.cols()) + ", masses are " + std::to_string(m) +
                      " and " + std::to_string(n));
  }
  if (!p.cost.allFinite()) throw DomainError("solve_transport: non-finite cost entry");
  if ((p.cost.array() < 0.0).any()) throw DomainError("solve_transport: negative cost entry");
  if ((p.source.array() < 0.0).any() || (p.target.array() < 0.0).any()) {
    throw DomainError("solve_transport: negative mass");
  }
  if (std::abs(p.source.sum() - 1.0) > 1e-9 || std::abs(p.target.sum() - 1.0) > 1e-9) {
    throw DomainError("solve_transport: masses must sum to 1");
  }
}

}  // namespace

TransportSolution solve_transport(const TransportProblem& problem) {
  validate(problem);

  // Work on the positive-mass rows and columns only.
  std::vector<Eigen::Index> rows, cols;
  for (Eigen::Index i = 0; i < problem.source.size(); ++i) {
    if (problem.source(i) > 0.0) rows.push_back(i);
  }
  for (Eigen::Index j = 0; j < problem.target.size(); ++j) {
    if (problem.target(j) > 0.0) cols.push_back(j);
  }
  const std::size_t m = rows.size();
  const std::size_t n = cols.size();
  Eigen::MatrixXd cost(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));
  std::vector<double> supply(m), demand(n);
  for (std::size_t i = 0; i < m; ++i) {
    supply[i] = problem.source(rows[i]);
    for (std::size_t j = 0; j < n; ++j) {
      cost(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          problem.cost(rows[i], cols[j]);
    }
  }
  for (std::size_t j = 0; j < n; ++j) demand[j] = problem.target(cols[j]);
  {
    // Balance the totals exactly so the north-west corner ends feasible.
    double s = 0.0, d = 0.0;
    for (double x : supply) s += x;
    for (double x : demand) d += x;
    for (double& x : demand) x *= s / d;
  }

  Basis basis(m, n);
  {
    std::vector<double> ra(supply), rb(demand);
    std::size_t i = 0, j = 0;
    for (;;) {
      const double x = std::min(ra[i], rb[j]);
      basis.add(i, j, x);
      ra[i] -= x;
      rb[j] -= x;
      if (i == m - 1 && j == n - 1) break;
      if (i == m - 1) {
        ++j;
      } else if (j == n - 1) {
        ++i;
      } else if (ra[i] <= rb[j]) {
        ++i;
      } else {
        ++j;
      }
    }
  }

  const double max_cost = cost.size() ? cost.maxCoeff() : 0.0;
  const double tolerance = 1e-12 * (1.0 + max_cost);
  std::vector<double> u, v;
  std::size_t degenerate_run = 0;
  const std::size_t bland_after = 50 * (m + n);
  const std::size_t max_iterations = 1000 * (m + n) * (m + n) + 1000;

  for (std::size_t iteration = 0;; ++iteration) {
    if (iteration > max_iterations) {
      throw DomainError("solve_transport: iteration limit reached");
    }
    basis.potentials(cost, u, v);
    const bool bland = degenerate_run > bland_after;
    std::size_t enter_i = m, enter_j = n;
    double best = -tolerance;
    for (std::size_t i = 0; i < m && !(bland && enter_i < m); ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (basis.basic(i, j)) continue;
        const double r =
            cost(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) - u[i] - v[j];
        if (r < best) {
          best = r;
          enter_i = i;
          enter_j = j;
          if (bland) break;
        }
      }
    }
    if (enter_i == m) break;  // optimal

    const auto path = basis.path(enter_i, enter_j);
    // Along the path from the entering row to the entering column the signs
    // alternate starting with '-' at the row end.
    auto& cells = basis.cells();
    double theta = std::numeric_limits<double>::infinity();
    std::size_t leave = cells.size();
    for (std::size_t p = 0; p < path.size(); p += 2) {
      const auto& c = cells[path[p]];
      const bool better = c.flow < theta;
      const bool tie = c.flow == theta && leave < cells.size() &&
                       (c.row < cells[leave].row ||
                        (c.row == cells[leave].row && c.col < cells[leave].col));
      if (better || tie) {
        theta = c.flow;
        leave = path[p];
      }
    }
    for (std::size_t p = 0; p < path.size(); ++p) {
      auto& c = cells[path[p]];
      c.flow += (p % 2 == 0) ? -theta : theta;
      if (c.flow < 0.0) c.flow = 0.0;
    }
    degenerate_run = theta == 0.0 ? degenerate_run + 1 : 0;
    basis.remove(leave);
    basis.add(enter_i, enter_j, theta);
  }

  TransportSolution sol;
  sol.plan = Eigen::MatrixXd::Zero(problem.source.size(), problem.target.size());
  for (const auto& c : basis.cells()) {
    sol.plan(rows[c.row], cols[c.col]) += c.flow;
  }
  sol.cost = (sol.plan.array() * problem.cost.array()).sum();
  return sol;
}

}  // namespace affect_sdt
