#include "mmc/control.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>

namespace mmc {

void ControllerConfig::validate() const {
  if (!(lambda_q > 0.0)) {
    throw std::invalid_argument("lambda_q must be positive");
  }
  if (const auto* fixed = std::get_if<FixedSlackPenalty>(&lambda_delta); fixed && !(fixed->value > 0.0)) {
    throw std::invalid_argument("fixed lambda_delta must be positive");
  }
  if (const auto* inv = std::get_if<InverseErrorSlackPenalty>(&lambda_delta); inv && !(inv->max_cap > 0.0)) {
    throw std::invalid_argument("lambda_delta cap must be positive");
  }
  if (!(eta > 0.0)) {
    throw std::invalid_argument("damper gain eta must be positive");
  }
  if (!(rho_s >= 0.0 && rho_s < rho_i)) {
    throw std::invalid_argument("damper distances need 0 <= rho_s < rho_i");
  }
  if (!(park_gain > 0.0) || !(singular_eps > 0.0)) {
    throw std::invalid_argument("park_gain and singular_eps must be positive");
  }
  if ((slack_min.array() > slack_max.array()).any()) {
    throw std::invalid_argument("slack lower bound exceeds upper bound");
  }
}

std::string to_string(ControlStatus s) {
  switch (s) {
    case ControlStatus::ok: return "ok";
    case ControlStatus::singular: return "singular";
    case ControlStatus::infeasible: return "infeasible";
  }
  return "unknown";
}

Pseudoinverse pseudoinverse(const Eigen::MatrixXd& J, double rank_tol) {
  const Eigen::Index n = J.cols();
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(J, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::VectorXd& sigma = svd.singularValues();
  Pseudoinverse out;
  out.sigma_min = sigma.size() > 0 ? sigma[sigma.size() - 1] : 0.0;
  out.rank = 0;
  for (Eigen::Index i = 0; i < sigma.size(); ++i) {
    if (sigma[i] > rank_tol) {
      ++out.rank;
    }
  }
  const Eigen::Index r = out.rank;
  const Eigen::MatrixXd& U = svd.matrixU();
  const Eigen::MatrixXd& V = svd.matrixV();
  out.pinv = V.leftCols(r) * sigma.head(r).cwiseInverse().asDiagonal() * U.leftCols(r).transpose();
  out.null_basis = V.rightCols(n - r);
  return out;
}

namespace {

// Manipulability and its gradient, or nothing at a singularity.
std::optional<Eigen::VectorXd> try_gradient(const RobotModel& model, const JointConfig& q, const Jacobian& J,
                                            double m, const ControllerConfig& cfg) {
  if (!(m > cfg.singular_eps)) {
    return std::nullopt;
  }
  return manipulability_jacobian(J, hessian(model, q, J), cfg.axes, cfg.singular_eps);
}

ControlStep rrmc_from(const Pseudoinverse& P, const Eigen::VectorXd& nu) {
  ControlStep step;
  step.qdot = P.pinv * nu;
  step.qdot_secondary = Eigen::VectorXd::Zero(P.pinv.rows());
  step.status = P.sigma_min < 1e-8 ? ControlStatus::singular : ControlStatus::ok;
  return step;
}

// Park and Baur share the structure qdot = J+ nu + k N N^T w.
ControlStep projected_step(const RobotModel& model, const JointConfig& q, const SpatialVelocity& nu,
                           const ControllerConfig& cfg, bool joint_limits) {
  const Jacobian J = jacobian(model, q);
  const Pseudoinverse P = pseudoinverse(J);
  ControlStep step = rrmc_from(P, nu);
  step.m = manipulability(J, cfg.axes);
  const auto Jm = try_gradient(model, q, J, step.m, cfg);

  if (P.null_basis.cols() > 0) {
    Eigen::VectorXd secondary = Eigen::VectorXd::Zero(model.n());
    if (Jm) {
      secondary += *Jm;
    } else {
      step.status = ControlStatus::singular;
    }
    if (joint_limits) {
      secondary += joint_limit_repulsion(model, q, cfg);
    }
    step.qdot_secondary = cfg.park_gain * (P.null_basis * (P.null_basis.transpose() * secondary));
    step.qdot += step.qdot_secondary;
  }
  if (Jm) {
    step.mdot_predicted = Jm->dot(step.qdot);
  }
  return step;
}

}  // namespace

ControlStep rrmc_step(const Eigen::MatrixXd& J, const Eigen::VectorXd& nu) {
  if (J.rows() != nu.size()) {
    throw DimensionError("rrmc_step: Jacobian rows and velocity size differ");
  }
  return rrmc_from(pseudoinverse(J), nu);
}

ControlStep rrmc_step(const RobotModel& model, const JointConfig& q, const SpatialVelocity& nu) {
  const Jacobian J = jacobian(model, q);
  ControlStep step = rrmc_from(pseudoinverse(J), nu);
  const ControllerConfig defaults;
  step.m = manipulability(J, defaults.axes);
  if (const auto Jm = try_gradient(model, q, J, step.m, defaults)) {
    step.mdot_predicted = Jm->dot(step.qdot);
  }
  return step;
}

ControlStep park_step(const RobotModel& model, const JointConfig& q, const SpatialVelocity& nu,
                      const ControllerConfig& cfg) {
  return projected_step(model, q, nu, cfg, false);
}

ControlStep baur_step(const RobotModel& model, const JointConfig& q, const SpatialVelocity& nu,
                      const ControllerConfig& cfg) {
  return projected_step(model, q, nu, cfg, true);
}

std::optional<double> velocity_damper(double rho, const ControllerConfig& cfg) {
  if (rho < cfg.rho_i) {
    return cfg.eta * (rho - cfg.rho_s) / (cfg.rho_i - cfg.rho_s);
  }
  return std::nullopt;
}

InequalityRows damper_constraints(const RobotModel& model, const JointConfig& q, const ControllerConfig& cfg) {
  const int n = model.n();
  const JointLimits& lim = model.limits();
  std::vector<std::pair<int, double>> rows;  // (joint, bound)
  // +1 guards the upper limit, -1 the lower one.
  std::vector<double> signs;
  for (int i = 0; i < n; ++i) {
    const double to_upper = lim.position_max[i] - q[i];
    const double to_lower = q[i] - lim.position_min[i];
    const bool near_upper = to_upper <= to_lower;
    if (const auto bound = velocity_damper(near_upper ? to_upper : to_lower, cfg)) {
      rows.emplace_back(i, *bound);
      signs.push_back(near_upper ? 1.0 : -1.0);
    }
  }
  InequalityRows out{Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows.size()), n + 6),
                     Eigen::VectorXd(static_cast<Eigen::Index>(rows.size()))};
  for (size_t r = 0; r < rows.size(); ++r) {
    const auto row = static_cast<Eigen::Index>(r);
    out.A(row, rows[r].first) = signs[r];
    out.b[row] = rows[r].second;
  }
  return out;
}

Eigen::VectorXd joint_limit_repulsion(const RobotModel& model, const JointConfig& q, const ControllerConfig& cfg) {
  const JointLimits& lim = model.limits();
  Eigen::VectorXd w = Eigen::VectorXd::Zero(model.n());
  for (int i = 0; i < model.n(); ++i) {
    const double to_upper = lim.position_max[i] - q[i];
    const double to_lower = q[i] - lim.position_min[i];
    const bool near_upper = to_upper <= to_lower;
    const double rho = near_upper ? to_upper : to_lower;
    if (rho < cfg.rho_i) {
      const double push = (cfg.rho_i - rho) / (cfg.rho_i - cfg.rho_s);
      w[i] = near_upper ? -push : push;
    }
  }
  return w;
}

double slack_penalty(const ControllerConfig& cfg, double pose_error_norm) {
  if (const auto* fixed = std::get_if<FixedSlackPenalty>(&cfg.lambda_delta)) {
    return fixed->value;
  }
  const double cap = std::get<InverseErrorSlackPenalty>(cfg.lambda_delta).max_cap;
  if (!(pose_error_norm > 0.0)) {
    return cap;
  }
  return std::min(1.0 / pose_error_norm, cap);
}

qp::QuadraticProgram mmc_problem(const RobotModel& model, const JointConfig& q, const Jacobian& J,
                                 const Eigen::VectorXd& Jm, const SpatialVelocity& nu, double lambda_delta,
                                 const ControllerConfig& cfg) {
  const int n = model.n();
  const int k = n + 6;
  qp::QuadraticProgram p;
  p.Q = Eigen::MatrixXd::Zero(k, k);
  p.Q.topLeftCorner(n, n).diagonal().setConstant(cfg.lambda_q);
  p.Q.bottomRightCorner(6, 6).diagonal().setConstant(lambda_delta);
  // Minimising -Jm^T qdot maximises the manipulability rate.
  p.c = Eigen::VectorXd::Zero(k);
  p.c.head(n) = -Jm;

  p.A_eq.resize(6, k);
  p.A_eq << J, Eigen::Matrix<double, 6, 6>::Identity();
  p.b_eq = nu;

  InequalityRows damper = damper_constraints(model, q, cfg);
  p.A_in = std::move(damper.A);
  p.b_in = std::move(damper.b);

  const JointLimits& vel = cfg.velocity_limits ? *cfg.velocity_limits : model.limits();
  p.lower.resize(k);
  p.upper.resize(k);
  p.lower << vel.velocity_min, cfg.slack_min;
  p.upper << vel.velocity_max, cfg.slack_max;
  return p;
}

ControlStep mmc_step(const RobotModel& model, const JointConfig& q, const SpatialVelocity& nu,
                     double pose_error_norm, const ControllerConfig& cfg) {
  const int n = model.n();
  const Jacobian J = jacobian(model, q);
  ControlStep step;
  step.qdot = Eigen::VectorXd::Zero(n);
  step.qdot_secondary = Eigen::VectorXd::Zero(n);
  step.m = manipulability(J, cfg.axes);
  const auto Jm = try_gradient(model, q, J, step.m, cfg);
  if (!Jm) {
    step.status = ControlStatus::singular;
    return step;
  }

  const qp::QuadraticProgram problem =
      mmc_problem(model, q, J, *Jm, nu, slack_penalty(cfg, pose_error_norm), cfg);
  const qp::Solution sol = qp::solve(problem);
  step.qp_iterations = sol.iterations;
  if (sol.status != qp::Status::optimal) {
    step.status = ControlStatus::infeasible;
    return step;
  }
  step.qdot = sol.x.head(n);
  step.slack = sol.x.tail(6);
  step.mdot_predicted = Jm->dot(step.qdot);
  return step;
}

}  // namespace mmc
