#pragma once

#include <Eigen/Core>

#include <string>

namespace mmc::qp {

/**
 * Strictly convex QP
 *
 *   minimise    1/2 x^T Q x + c^T x
 *   subject to  A_eq x  = b_eq
 *               A_in x <= b_in
 *               lower <= x <= upper
 *
 * Constraint blocks may have zero rows. `lower`/`upper` may be empty (no
 * bounds) or hold +-infinity entries for unbounded components.
 */
struct QuadraticProgram {
  Eigen::MatrixXd Q;
  Eigen::VectorXd c;
  Eigen::MatrixXd A_eq;
  Eigen::VectorXd b_eq;
  Eigen::MatrixXd A_in;
  Eigen::VectorXd b_in;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  Eigen::Index size() const { return c.size(); }
  double objective(const Eigen::VectorXd& x) const { return 0.5 * x.dot(Q * x) + c.dot(x); }
};

enum class Status { optimal, infeasible, max_iterations };

struct KktResiduals {
  double stationarity = 0.0;  // |Qx + c + A_eq^T y + A_in^T z - mu_lo + mu_up|_inf
  double equality = 0.0;      // |A_eq x - b_eq|_inf
  double inequality = 0.0;    // largest inequality or bound violation
};

/**
 * Solver output. Multiplier signs follow the Lagrangian
 *   L = f + y^T (A_eq x - b_eq) + z^T (A_in x - b_in)
 *         + mu_lower^T (lower - x) + mu_upper^T (x - upper)
 * with z, mu_lower, mu_upper >= 0.
 */
struct Solution {
  Eigen::VectorXd x;
  double objective = 0.0;
  Status status = Status::infeasible;
  int iterations = 0;
  KktResiduals kkt_residuals;
  Eigen::VectorXd eq_multipliers;
  Eigen::VectorXd in_multipliers;
  Eigen::VectorXd lower_multipliers;
  Eigen::VectorXd upper_multipliers;
};

/// Throws std::invalid_argument on inconsistent dimensions, an asymmetric Q,
/// lower > upper, or a Q that is not positive definite.
Solution solve(const QuadraticProgram& problem, double tol = 1e-8, int max_iter = 200);

std::string to_string(Status s);

}  // namespace mmc::qp
