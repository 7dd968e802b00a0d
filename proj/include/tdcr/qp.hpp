#pragma once

#include <vector>

#include <Eigen/Dense>

namespace tdcr::qp {

/// Dense strictly convex QP
///
///   minimize   0.5 x'Hx + g'x
///   subject to E x  = e
///              A x >= b
///
/// H must be symmetric positive definite.
struct Problem {
  Eigen::MatrixXd H;
  Eigen::VectorXd g;
  Eigen::MatrixXd E;  // rows are equality constraints; may have zero rows
  Eigen::VectorXd e;
  Eigen::MatrixXd A;  // rows are inequality constraints; may have zero rows
  Eigen::VectorXd b;
};

enum class Status { kOptimal, kInfeasible, kMaxIterations, kNotConvex };

struct Result {
  Status status = Status::kInfeasible;
  Eigen::VectorXd x;
  double objective = 0.0;
  /// Multipliers of the inequality rows (zero for inactive ones) and of the
  /// equality rows. Stationarity reads H x + g = A' lambda + E' mu.
  Eigen::VectorXd lambda;
  Eigen::VectorXd mu;
  std::vector<int> active;  // inequality rows in the final working set
  int iterations = 0;
};

/// Goldfarb-Idnani dual active-set method. Starts from the unconstrained
/// minimizer and adds violated constraints one at a time while keeping dual
/// feasibility, so the first primal feasible iterate is optimal.
Result solve(const Problem& problem, int max_iterations = 1000);

const char* to_string(Status status);

}  // namespace tdcr::qp
