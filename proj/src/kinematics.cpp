#include "mmc/kinematics.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <sstream>

namespace mmc {

Pose Pose::from_isometry(const Eigen::Isometry3d& T) { return Pose{T.linear(), T.translation()}; }

Eigen::Isometry3d Pose::isometry() const {
  Eigen::Isometry3d T = Eigen::Isometry3d::Identity();
  T.linear() = rotation;
  T.translation() = translation;
  return T;
}

HessianTensor::HessianTensor(int n) : slices_(static_cast<size_t>(n), Jacobian::Zero(6, n)) {}

namespace {

void check_config(const RobotModel& model, const JointConfig& q) {
  if (q.size() != model.n()) {
    std::ostringstream os;
    os << "joint configuration has " << q.size() << " entries, model '" << model.name() << "' has "
       << model.n() << " joints";
    throw DimensionError(os.str());
  }
}

}  // namespace

ChainFrames chain_frames(const RobotModel& model, const JointConfig& q) {
  check_config(model, q);
  ChainFrames frames;
  frames.axes.reserve(static_cast<size_t>(model.n()));
  frames.origins.reserve(static_cast<size_t>(model.n()));

  Eigen::Isometry3d T = Eigen::Isometry3d::Identity();
  for (const auto& et : model.ets()) {
    if (et.is_variable()) {
      T = T * et.eval(q[et.joint()]);
      // Motion about/along a local axis leaves that axis unchanged, so the
      // frame after the factor gives the world axis and origin.
      frames.axes.push_back(T.linear().col(static_cast<int>(et.axis())));
      frames.origins.push_back(T.translation());
    } else {
      T = T * et.eval();
    }
  }
  frames.end_effector = Pose::from_isometry(T);
  return frames;
}

Pose forward_kinematics(const RobotModel& model, const JointConfig& q) {
  check_config(model, q);
  Eigen::Isometry3d T = Eigen::Isometry3d::Identity();
  for (const auto& et : model.ets()) {
    T = T * (et.is_variable() ? et.eval(q[et.joint()]) : et.eval());
  }
  return Pose::from_isometry(T);
}

Jacobian jacobian(const RobotModel& model, const JointConfig& q) {
  const ChainFrames frames = chain_frames(model, q);
  const int n = model.n();
  Jacobian J(6, n);
  const Eigen::Vector3d& pe = frames.end_effector.translation;
  for (int i = 0; i < n; ++i) {
    const Eigen::Vector3d& z = frames.axes[static_cast<size_t>(i)];
    if (model.joint_type(i) == JointType::revolute) {
      J.block<3, 1>(0, i) = z.cross(pe - frames.origins[static_cast<size_t>(i)]);
      J.block<3, 1>(3, i) = z;
    } else {
      J.block<3, 1>(0, i) = z;
      J.block<3, 1>(3, i).setZero();
    }
  }
  return J;
}

HessianTensor hessian(const RobotModel& model, const JointConfig& q) {
  return hessian(model, q, jacobian(model, q));
}

HessianTensor hessian(const RobotModel& model, const JointConfig& q, const Jacobian& J) {
  check_config(model, q);
  const int n = model.n();
  if (J.cols() != n) {
    throw DimensionError("Jacobian column count does not match the model");
  }
  HessianTensor H(n);
  // With w_k the rotational sub-column (zero for prismatic joints) and v_k the
  // translational one, for joints ordered along the chain:
  //   d v_j / d q_i = w_min(i,j) x v_max(i,j)
  //   d w_j / d q_i = w_i x w_j  if i < j, else 0
  for (int i = 0; i < n; ++i) {
    Jacobian& slice = H.slice(i);
    const Eigen::Vector3d wi = J.block<3, 1>(3, i);
    for (int j = 0; j < n; ++j) {
      const int lo = std::min(i, j);
      const int hi = std::max(i, j);
      const Eigen::Vector3d wlo = J.block<3, 1>(3, lo);
      const Eigen::Vector3d vhi = J.block<3, 1>(0, hi);
      slice.block<3, 1>(0, j) = wlo.cross(vhi);
      if (i < j) {
        slice.block<3, 1>(3, j) = wi.cross(J.block<3, 1>(3, j));
      } else {
        slice.block<3, 1>(3, j).setZero();
      }
    }
  }
  return H;
}

Eigen::MatrixXd select_rows(const Eigen::MatrixXd& J, AxisSelection sel) {
  switch (sel) {
    case AxisSelection::all: return J;
    case AxisSelection::translational: return J.topRows(3);
    case AxisSelection::rotational: return J.middleRows(3, 3);
    case AxisSelection::translational_xy: return J.topRows(2);
  }
  return J;
}

double manipulability(const Jacobian& J, AxisSelection sel) {
  const Eigen::MatrixXd Js = select_rows(J, sel);
  if (Js.rows() > Js.cols()) {
    return 0.0;
  }
  const double det = (Js * Js.transpose()).determinant();
  if (std::abs(det) < 1e-14 || det < 0.0) {
    return 0.0;
  }
  return std::sqrt(det);
}

Eigen::VectorXd vec(const Eigen::MatrixXd& M) {
  // Eigen's default storage is column-major.
  return Eigen::Map<const Eigen::VectorXd>(M.data(), M.size());
}

Eigen::VectorXd manipulability_jacobian(const Jacobian& J, const HessianTensor& H, AxisSelection sel,
                                        double singular_eps) {
  const int n = static_cast<int>(J.cols());
  if (H.n() != n) {
    throw DimensionError("Hessian and Jacobian sizes differ");
  }
  const double m = manipulability(J, sel);
  if (!(m > singular_eps)) {
    std::ostringstream os;
    os << "singular configuration: manipulability " << m << " <= " << singular_eps;
    throw SingularityError(os.str());
  }
  const Eigen::MatrixXd Js = select_rows(J, sel);
  const Eigen::MatrixXd A = Js * Js.transpose();
  const Eigen::VectorXd inv_vec = vec(A.inverse());

  Eigen::VectorXd Jm(n);
  for (int i = 0; i < n; ++i) {
    const Eigen::MatrixXd Hi = select_rows(H.slice(i), sel);
    Jm[i] = m * vec(Js * Hi.transpose()).dot(inv_vec);
  }
  return Jm;
}

Eigen::VectorXd manipulability_jacobian(const RobotModel& model, const JointConfig& q, AxisSelection sel,
                                        double singular_eps) {
  const Jacobian J = jacobian(model, q);
  return manipulability_jacobian(J, hessian(model, q, J), sel, singular_eps);
}

VelocityEllipsoid velocity_ellipsoid(const Jacobian& J, AxisSelection sel) {
  if (sel != AxisSelection::translational && sel != AxisSelection::rotational) {
    throw std::invalid_argument("velocity ellipsoid needs the translational or rotational block");
  }
  const Eigen::MatrixXd Js = select_rows(J, sel);
  const Eigen::Matrix3d A = Js * Js.transpose();
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(A);
  VelocityEllipsoid out;
  // Eigenvalues come back ascending.
  for (int k = 0; k < 3; ++k) {
    out.radii[k] = std::sqrt(std::max(0.0, eig.eigenvalues()[2 - k]));
    out.axes.col(k) = eig.eigenvectors().col(2 - k);
  }
  return out;
}

}  // namespace mmc
