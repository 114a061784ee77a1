#pragma once

#include <Eigen/Core>

#include <optional>
#include <string>
#include <variant>

#include "mmc/kinematics.hpp"
#include "mmc/model.hpp"
#include "mmc/qp.hpp"

namespace mmc {

inline constexpr double deg2rad(double deg) { return deg * 3.14159265358979323846 / 180.0; }

/// Slack penalty held at a constant value.
struct FixedSlackPenalty {
  double value = 1.0;
};
/// Slack penalty 1/e for pose error norm e, capped at `max_cap`.
struct InverseErrorSlackPenalty {
  double max_cap = 1e6;
};
using SlackPenalty = std::variant<FixedSlackPenalty, InverseErrorSlackPenalty>;

struct ControllerConfig {
  double lambda_q = 0.01;
  SlackPenalty lambda_delta = InverseErrorSlackPenalty{};
  // Velocity damper: gain, influence distance and stopping distance (rad).
  double eta = 1.0;
  double rho_i = deg2rad(50.0);
  double rho_s = deg2rad(2.0);
  // Joint velocity box for the MMC QP; taken from the model when unset.
  std::optional<JointLimits> velocity_limits;
  Vector6d slack_min = Vector6d::Constant(-10.0);
  Vector6d slack_max = Vector6d::Constant(10.0);
  double park_gain = 100.0;
  double singular_eps = kDefaultSingularEps;
  AxisSelection axes = AxisSelection::all;

  /// Throws std::invalid_argument when a gain is non-positive or rho_s >= rho_i.
  void validate() const;
};

enum class ControlStatus { ok, singular, infeasible };
std::string to_string(ControlStatus s);

struct ControlStep {
  Eigen::VectorXd qdot;
  Vector6d slack = Vector6d::Zero();
  ControlStatus status = ControlStatus::ok;
  double m = 0.0;
  double mdot_predicted = 0.0;
  /// Part of qdot lying in the null space of J (Park/Baur only).
  Eigen::VectorXd qdot_secondary;
  int qp_iterations = 0;
};

/// Moore-Penrose pseudoinverse together with a null-space basis.
struct Pseudoinverse {
  Eigen::MatrixXd pinv;        // n x rows
  Eigen::MatrixXd null_basis;  // n x (n - rank), orthonormal columns
  double sigma_min = 0.0;      // smallest of the min(rows, n) singular values
  int rank = 0;
};
Pseudoinverse pseudoinverse(const Eigen::MatrixXd& J, double rank_tol = 1e-8);

ControlStep rrmc_step(const RobotModel& model, const JointConfig& q, const SpatialVelocity& nu);
/// RRMC on an explicit Jacobian; the toy-Jacobian entry point.
ControlStep rrmc_step(const Eigen::MatrixXd& J, const Eigen::VectorXd& nu);

ControlStep park_step(const RobotModel& model, const JointConfig& q, const SpatialVelocity& nu,
                      const ControllerConfig& cfg);
ControlStep baur_step(const RobotModel& model, const JointConfig& q, const SpatialVelocity& nu,
                      const ControllerConfig& cfg);

/// Velocity bound eta (rho - rho_s) / (rho_i - rho_s) inside the influence
/// distance, nothing outside it.
std::optional<double> velocity_damper(double rho, const ControllerConfig& cfg);

struct InequalityRows {
  Eigen::MatrixXd A;  // rows x (n + 6), slack block zero
  Eigen::VectorXd b;
};
InequalityRows damper_constraints(const RobotModel& model, const JointConfig& q, const ControllerConfig& cfg);

/// Repulsion from nearby joint limits used by the Baur controller.
Eigen::VectorXd joint_limit_repulsion(const RobotModel& model, const JointConfig& q,
                                      const ControllerConfig& cfg);

double slack_penalty(const ControllerConfig& cfg, double pose_error_norm);

/// The MMC quadratic program over x = (qdot, slack), built from explicit
/// kinematic quantities.
qp::QuadraticProgram mmc_problem(const RobotModel& model, const JointConfig& q, const Jacobian& J,
                                 const Eigen::VectorXd& Jm, const SpatialVelocity& nu, double lambda_delta,
                                 const ControllerConfig& cfg);

ControlStep mmc_step(const RobotModel& model, const JointConfig& q, const SpatialVelocity& nu,
                     double pose_error_norm, const ControllerConfig& cfg);

}  // namespace mmc
