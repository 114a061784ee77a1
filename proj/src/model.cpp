#include "mmc/model.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

namespace mmc {

ElementaryTransform ElementaryTransform::constant(TransformKind kind, Axis axis, double value) {
  if (!std::isfinite(value)) {
    throw ModelError("elementary transform value must be finite");
  }
  return ElementaryTransform(kind, axis, value);
}

ElementaryTransform ElementaryTransform::variable(TransformKind kind, Axis axis, int joint) {
  if (joint < 0) {
    throw ModelError("joint index must be non-negative");
  }
  return ElementaryTransform(kind, axis, JointIndex{joint});
}

double ElementaryTransform::value() const {
  if (is_variable()) {
    throw std::logic_error("variable transform has no fixed value");
  }
  return std::get<double>(param_);
}

int ElementaryTransform::joint() const {
  if (!is_variable()) {
    throw std::logic_error("constant transform has no joint index");
  }
  return std::get<JointIndex>(param_).value;
}

namespace {

Eigen::Vector3d unit(Axis axis) {
  switch (axis) {
    case Axis::x: return Eigen::Vector3d::UnitX();
    case Axis::y: return Eigen::Vector3d::UnitY();
    case Axis::z: return Eigen::Vector3d::UnitZ();
  }
  return Eigen::Vector3d::UnitZ();
}

char axis_char(Axis axis) {
  switch (axis) {
    case Axis::x: return 'x';
    case Axis::y: return 'y';
    case Axis::z: return 'z';
  }
  return '?';
}

}  // namespace

Eigen::Isometry3d ElementaryTransform::eval(double q) const {
  const double v = is_variable() ? q : std::get<double>(param_);
  Eigen::Isometry3d T = Eigen::Isometry3d::Identity();
  if (kind_ == TransformKind::translation) {
    T.translation() = v * unit(axis_);
  } else {
    const double c = std::cos(v);
    const double s = std::sin(v);
    Eigen::Matrix3d R;
    switch (axis_) {
      case Axis::x: R << 1, 0, 0, 0, c, -s, 0, s, c; break;
      case Axis::y: R << c, 0, s, 0, 1, 0, -s, 0, c; break;
      case Axis::z: R << c, -s, 0, s, c, 0, 0, 0, 1; break;
    }
    T.linear() = R;
  }
  return T;
}

std::string ElementaryTransform::to_string() const {
  std::ostringstream os;
  os << (kind_ == TransformKind::rotation ? 'R' : 'T') << axis_char(axis_) << '(';
  if (is_variable()) {
    os << 'q' << joint();
  } else {
    os << value();
  }
  os << ')';
  return os.str();
}

ElementaryTransform tx(double v) { return ElementaryTransform::constant(TransformKind::translation, Axis::x, v); }
ElementaryTransform ty(double v) { return ElementaryTransform::constant(TransformKind::translation, Axis::y, v); }
ElementaryTransform tz(double v) { return ElementaryTransform::constant(TransformKind::translation, Axis::z, v); }
ElementaryTransform rx(double v) { return ElementaryTransform::constant(TransformKind::rotation, Axis::x, v); }
ElementaryTransform ry(double v) { return ElementaryTransform::constant(TransformKind::rotation, Axis::y, v); }
ElementaryTransform rz(double v) { return ElementaryTransform::constant(TransformKind::rotation, Axis::z, v); }

bool JointLimits::within_position(const Eigen::VectorXd& q) const {
  if (q.size() != position_min.size()) {
    return false;
  }
  return ((q.array() >= position_min.array()) && (q.array() <= position_max.array())).all();
}

RobotModel::RobotModel(std::string name, Ets ets, JointLimits limits)
    : name_(std::move(name)), ets_(std::move(ets)), limits_(std::move(limits)) {
  int expected = 0;
  for (const auto& et : ets_) {
    if (!et.is_variable()) {
      continue;
    }
    if (et.joint() != expected) {
      std::ostringstream os;
      os << "model '" << name_ << "': joint indices must be contiguous and ordered along the chain; "
         << "expected q" << expected << ", found q" << et.joint();
      throw ModelError(os.str());
    }
    joint_types_.push_back(et.is_rotation() ? JointType::revolute : JointType::prismatic);
    ++expected;
  }
  n_ = expected;
  if (n_ == 0) {
    throw ModelError("model '" + name_ + "' has no joints");
  }

  const auto check_size = [&](const Eigen::VectorXd& v, const char* what) {
    if (v.size() != n_) {
      std::ostringstream os;
      os << "model '" << name_ << "': " << what << " has " << v.size() << " entries, expected " << n_;
      throw ModelError(os.str());
    }
    if (!v.allFinite()) {
      throw ModelError("model '" + name_ + "': " + what + " must be finite");
    }
  };
  check_size(limits_.position_min, "position_min");
  check_size(limits_.position_max, "position_max");
  check_size(limits_.velocity_min, "velocity_min");
  check_size(limits_.velocity_max, "velocity_max");
  for (int i = 0; i < n_; ++i) {
    if (!(limits_.position_min[i] < limits_.position_max[i])) {
      throw ModelError("model '" + name_ + "': joint " + std::to_string(i) +
                       " position_min must be below position_max");
    }
    if (!(limits_.velocity_min[i] < 0.0 && limits_.velocity_max[i] > 0.0)) {
      throw ModelError("model '" + name_ + "': joint " + std::to_string(i) +
                       " velocity limits must straddle zero");
    }
  }
}

std::string to_string(JointType t) { return t == JointType::revolute ? "revolute" : "prismatic"; }

RobotModel load_urdf_file(const std::string& path, const std::string& tip_link) {
  std::ifstream in(path);
  if (!in) {
    throw ModelError("cannot open URDF file '" + path + "'");
  }
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_urdf(buf.str(), tip_link);
}

RobotModel load_dh_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ModelError("cannot open DH file '" + path + "'");
  }
  std::stringstream buf;
  buf << in.rdbuf();
  std::string stem = path;
  if (auto slash = stem.find_last_of('/'); slash != std::string::npos) {
    stem = stem.substr(slash + 1);
  }
  if (auto dot = stem.find_last_of('.'); dot != std::string::npos && dot > 0) {
    stem = stem.substr(0, dot);
  }
  return load_dh(buf.str(), stem);
}

}  // namespace mmc
