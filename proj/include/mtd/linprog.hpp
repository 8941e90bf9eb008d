#pragma once

#include <Eigen/Dense>
#include <limits>

namespace mtd {

// min c^T x  s.t.  eq_lhs x = eq_rhs,  ub_lhs x <= ub_rhs,  lower <= x <= upper.
// Bounds may be +-infinity. Small dense problems only.
struct LinearProgram {
  Eigen::VectorXd objective;
  Eigen::MatrixXd eq_lhs;
  Eigen::VectorXd eq_rhs;
  Eigen::MatrixXd ub_lhs;
  Eigen::VectorXd ub_rhs;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
};

enum class LpStatus { Optimal, Infeasible, Unbounded };

struct LpResult {
  LpStatus status = LpStatus::Infeasible;
  Eigen::VectorXd x;
  double objective = 0.0;
  int iterations = 0;
};

// Two-phase primal simplex with Bland's rule; deterministic for fixed input.
LpResult solve_lp(const LinearProgram& lp);

inline constexpr double kLpInf = std::numeric_limits<double>::infinity();

}  // namespace mtd
