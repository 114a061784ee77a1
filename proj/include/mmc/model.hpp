#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace mmc {

/// Raised when a robot description cannot be loaded or fails validation.
class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class TransformKind { translation, rotation };
enum class Axis { x, y, z };
enum class JointType { revolute, prismatic };

struct JointIndex {
  int value;
};

/**
 * One factor of an elementary transform sequence: a pure rotation about, or
 * translation along, a single coordinate axis. The parameter is either a
 * fixed value (metres or radians) or a reference to a joint coordinate.
 */
class ElementaryTransform {
 public:
  static ElementaryTransform constant(TransformKind kind, Axis axis, double value);
  static ElementaryTransform variable(TransformKind kind, Axis axis, int joint);

  TransformKind kind() const { return kind_; }
  Axis axis() const { return axis_; }
  bool is_variable() const { return std::holds_alternative<JointIndex>(param_); }
  bool is_rotation() const { return kind_ == TransformKind::rotation; }

  /// Fixed value; throws std::logic_error for a variable transform.
  double value() const;
  /// Joint index; throws std::logic_error for a constant transform.
  int joint() const;

  /// Evaluate with joint coordinate `q` (ignored for constants).
  Eigen::Isometry3d eval(double q = 0.0) const;

  std::string to_string() const;

 private:
  ElementaryTransform(TransformKind kind, Axis axis, std::variant<double, JointIndex> p)
      : kind_(kind), axis_(axis), param_(p) {}

  TransformKind kind_;
  Axis axis_;
  std::variant<double, JointIndex> param_;
};

// Shorthand constructors for constant factors.
ElementaryTransform tx(double v);
ElementaryTransform ty(double v);
ElementaryTransform tz(double v);
ElementaryTransform rx(double v);
ElementaryTransform ry(double v);
ElementaryTransform rz(double v);

using Ets = std::vector<ElementaryTransform>;

struct JointLimits {
  Eigen::VectorXd position_min;
  Eigen::VectorXd position_max;
  Eigen::VectorXd velocity_min;
  Eigen::VectorXd velocity_max;

  Eigen::Index size() const { return position_min.size(); }
  bool within_position(const Eigen::VectorXd& q) const;
};

/**
 * Serial-link manipulator as an elementary transform sequence. Every joint
 * appears exactly once and joint indices increase along the chain, so joint
 * i is always upstream of joint i+1. Immutable after construction.
 */
class RobotModel {
 public:
  /// Validates the chain and limits; throws ModelError on any violation.
  RobotModel(std::string name, Ets ets, JointLimits limits);

  const std::string& name() const { return name_; }
  const Ets& ets() const { return ets_; }
  int n() const { return n_; }
  const JointLimits& limits() const { return limits_; }
  JointType joint_type(int i) const { return joint_types_.at(static_cast<size_t>(i)); }
  const std::vector<JointType>& joint_types() const { return joint_types_; }

 private:
  std::string name_;
  Ets ets_;
  int n_ = 0;
  JointLimits limits_;
  std::vector<JointType> joint_types_;
};

struct DHRow {
  double theta_offset = 0.0;
  double d = 0.0;
  double a = 0.0;
  double alpha = 0.0;
  JointType joint_type = JointType::revolute;
  // Limits are optional in DH tables; defaults are applied by dh_to_ets.
  std::optional<double> position_min;
  std::optional<double> position_max;
  std::optional<double> velocity_max;
};

/// Classic DH: each row becomes Rz(theta) Tz(d) Tx(a) Rx(alpha).
RobotModel dh_to_ets(const std::vector<DHRow>& rows, std::string name = "dh");

/// Parse the whitespace-separated DH table format:
/// `joint_type theta_offset d a alpha [pos_min pos_max vel_max]`, `#` comments.
std::vector<DHRow> parse_dh_table(std::string_view text);

RobotModel load_dh(std::string_view text, std::string name = "dh");

/// Parse a serial-chain URDF. When `tip_link` is empty the chain is followed
/// from the root until a link without children.
RobotModel parse_urdf(std::string_view document, const std::string& tip_link = {});

/// Bundled models: "panda", "ur5", "planar2r".
RobotModel builtin_model(std::string_view name);
std::vector<std::string> builtin_model_names();

/// Read a model from disk; the format is chosen by the caller.
RobotModel load_urdf_file(const std::string& path, const std::string& tip_link = {});
RobotModel load_dh_file(const std::string& path);

std::string to_string(JointType t);

}  // namespace mmc
