#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <stdexcept>
#include <vector>

#include "mmc/model.hpp"

namespace mmc {

using JointConfig = Eigen::VectorXd;
using Vector6d = Eigen::Matrix<double, 6, 1>;
/// Spatial velocity (v; omega) in the base frame.
using SpatialVelocity = Vector6d;
/// Geometric Jacobian in the base frame: rows 0-2 translational, 3-5 rotational.
using Jacobian = Eigen::Matrix<double, 6, Eigen::Dynamic>;

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when an operation needs a non-singular configuration.
class SingularityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Pose {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  static Pose from_isometry(const Eigen::Isometry3d& T);
  Eigen::Isometry3d isometry() const;
};

/// Second-order differential kinematics: slice(i) = dJ/dq_i (6 x n).
class HessianTensor {
 public:
  explicit HessianTensor(int n);

  int n() const { return static_cast<int>(slices_.size()); }
  const Jacobian& slice(int i) const { return slices_.at(static_cast<size_t>(i)); }
  Jacobian& slice(int i) { return slices_.at(static_cast<size_t>(i)); }
  /// H(row, j, i) = d J(row, j) / d q_i.
  double operator()(int row, int j, int i) const { return slices_[static_cast<size_t>(i)](row, j); }

 private:
  std::vector<Jacobian> slices_;
};

/// Which rows of the Jacobian a manipulability quantity is computed over.
/// `translational_xy` selects rows 0-1 for planar arms.
enum class AxisSelection { all, translational, rotational, translational_xy };

Pose forward_kinematics(const RobotModel& model, const JointConfig& q);
Jacobian jacobian(const RobotModel& model, const JointConfig& q);
HessianTensor hessian(const RobotModel& model, const JointConfig& q);
/// Same as `hessian` but reuses an already computed Jacobian.
HessianTensor hessian(const RobotModel& model, const JointConfig& q, const Jacobian& J);

/// Rows of J selected by `sel`.
Eigen::MatrixXd select_rows(const Eigen::MatrixXd& J, AxisSelection sel);

/// sqrt(det(J_sel J_sel^T)); determinants below 1e-14 in magnitude give 0.
double manipulability(const Jacobian& J, AxisSelection sel = AxisSelection::all);

/// Column-wise vectorisation.
Eigen::VectorXd vec(const Eigen::MatrixXd& M);

inline constexpr double kDefaultSingularEps = 1e-8;

/**
 * Gradient of the manipulability measure with respect to the joint
 * coordinates, so that mdot = Jm^T qdot. Entry i is
 * m * vec(J H_i^T)^T vec((J J^T)^-1) over the selected rows.
 *
 * Throws SingularityError when m <= singular_eps.
 */
Eigen::VectorXd manipulability_jacobian(const Jacobian& J, const HessianTensor& H,
                                        AxisSelection sel = AxisSelection::all,
                                        double singular_eps = kDefaultSingularEps);
Eigen::VectorXd manipulability_jacobian(const RobotModel& model, const JointConfig& q,
                                        AxisSelection sel = AxisSelection::all,
                                        double singular_eps = kDefaultSingularEps);

struct VelocityEllipsoid {
  Eigen::Vector3d radii;  // descending
  Eigen::Matrix3d axes;   // column k is the principal axis of radii[k]
};

/// Translational or rotational velocity ellipsoid of J J^T.
VelocityEllipsoid velocity_ellipsoid(const Jacobian& J, AxisSelection sel);

/// World-frame joint axes and origins plus the end-effector pose at q.
struct ChainFrames {
  std::vector<Eigen::Vector3d> axes;
  std::vector<Eigen::Vector3d> origins;
  Pose end_effector;
};
ChainFrames chain_frames(const RobotModel& model, const JointConfig& q);

}  // namespace mmc
