#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>
#include <string>

#include "mmc/model.hpp"

namespace mmc {

namespace {

namespace pt = boost::property_tree;

struct UrdfJoint {
  std::string name;
  std::string type;
  std::string parent;
  std::string child;
  Eigen::Vector3d xyz = Eigen::Vector3d::Zero();
  Eigen::Vector3d rpy = Eigen::Vector3d::Zero();
  Eigen::Vector3d axis = Eigen::Vector3d::UnitX();
  bool has_limit = false;
  double lower = 0.0;
  double upper = 0.0;
  double velocity = 0.0;
};

Eigen::Vector3d parse_triple(const std::string& text, const std::string& context) {
  std::istringstream in(text);
  Eigen::Vector3d v;
  if (!(in >> v[0] >> v[1] >> v[2])) {
    throw ModelError(context + ": expected three numbers, got '" + text + "'");
  }
  std::string extra;
  if (in >> extra) {
    throw ModelError(context + ": expected three numbers, got '" + text + "'");
  }
  return v;
}

double parse_number(const std::string& text, const std::string& context) {
  try {
    size_t used = 0;
    double v = std::stod(text, &used);
    if (used == text.size()) {
      return v;
    }
  } catch (const std::exception&) {
  }
  throw ModelError(context + ": '" + text + "' is not a number");
}

UrdfJoint read_joint(const pt::ptree& node) {
  UrdfJoint j;
  j.name = node.get<std::string>("<xmlattr>.name", "");
  j.type = node.get<std::string>("<xmlattr>.type", "");
  const std::string ctx = "joint '" + j.name + "'";
  if (j.name.empty()) {
    throw ModelError("URDF joint without a name attribute");
  }
  j.parent = node.get<std::string>("parent.<xmlattr>.link", "");
  j.child = node.get<std::string>("child.<xmlattr>.link", "");
  if (j.parent.empty() || j.child.empty()) {
    throw ModelError(ctx + " is missing its parent or child link");
  }
  if (auto origin = node.get_child_optional("origin")) {
    j.xyz = parse_triple(origin->get<std::string>("<xmlattr>.xyz", "0 0 0"), ctx + " origin xyz");
    j.rpy = parse_triple(origin->get<std::string>("<xmlattr>.rpy", "0 0 0"), ctx + " origin rpy");
  }
  if (auto axis = node.get_child_optional("axis")) {
    j.axis = parse_triple(axis->get<std::string>("<xmlattr>.xyz", "1 0 0"), ctx + " axis");
  }
  if (auto limit = node.get_child_optional("limit")) {
    j.has_limit = true;
    j.lower = parse_number(limit->get<std::string>("<xmlattr>.lower", "0"), ctx + " limit lower");
    j.upper = parse_number(limit->get<std::string>("<xmlattr>.upper", "0"), ctx + " limit upper");
    const auto velocity = limit->get_optional<std::string>("<xmlattr>.velocity");
    if (!velocity) {
      throw ModelError(ctx + ": limit element has no velocity attribute");
    }
    j.velocity = parse_number(*velocity, ctx + " limit velocity");
  }
  return j;
}

// URDF rpy is extrinsic roll-pitch-yaw, i.e. R = Rz(yaw) Ry(pitch) Rx(roll).
void append_rpy(Ets& ets, const Eigen::Vector3d& rpy) {
  if (rpy[2] != 0.0) ets.push_back(rz(rpy[2]));
  if (rpy[1] != 0.0) ets.push_back(ry(rpy[1]));
  if (rpy[0] != 0.0) ets.push_back(rx(rpy[0]));
}

void append_inverse_rpy(Ets& ets, const Eigen::Vector3d& rpy) {
  if (rpy[0] != 0.0) ets.push_back(rx(-rpy[0]));
  if (rpy[1] != 0.0) ets.push_back(ry(-rpy[1]));
  if (rpy[2] != 0.0) ets.push_back(rz(-rpy[2]));
}

Eigen::Vector3d rpy_of(const Eigen::Matrix3d& R) {
  const double yaw = std::atan2(R(1, 0), R(0, 0));
  const double pitch = std::atan2(-R(2, 0), std::hypot(R(2, 1), R(2, 2)));
  const double roll = std::atan2(R(2, 1), R(2, 2));
  return {roll, pitch, yaw};
}

// Emit the joint's motion about/along `axis` in the joint frame. Coordinate
// axes map to a single factor; other directions are conjugated onto z.
void append_motion(Ets& ets, const UrdfJoint& j, int index) {
  const TransformKind kind = j.type == "prismatic" ? TransformKind::translation : TransformKind::rotation;
  const double norm = j.axis.norm();
  if (norm < 1e-12) {
    throw ModelError("joint '" + j.name + "' has a zero-length axis");
  }
  const Eigen::Vector3d a = j.axis / norm;
  constexpr double kTol = 1e-9;
  for (int k = 0; k < 3; ++k) {
    const Eigen::Vector3d e = Eigen::Vector3d::Unit(k);
    if ((a - e).cwiseAbs().maxCoeff() < kTol) {
      ets.push_back(ElementaryTransform::variable(kind, static_cast<Axis>(k), index));
      return;
    }
  }
  const Eigen::Matrix3d align =
      Eigen::Quaterniond::FromTwoVectors(Eigen::Vector3d::UnitZ(), a).toRotationMatrix();
  const Eigen::Vector3d rpy = rpy_of(align);
  append_rpy(ets, rpy);
  ets.push_back(ElementaryTransform::variable(kind, Axis::z, index));
  append_inverse_rpy(ets, rpy);
}

}  // namespace

RobotModel parse_urdf(std::string_view document, const std::string& tip_link) {
  pt::ptree tree;
  try {
    std::istringstream in{std::string(document)};
    pt::read_xml(in, tree);
  } catch (const pt::xml_parser_error& e) {
    std::ostringstream os;
    os << "malformed URDF XML: " << e.message() << " (line " << e.line() << ")";
    throw ModelError(os.str());
  }
  const auto robot = tree.get_child_optional("robot");
  if (!robot) {
    throw ModelError("URDF document has no <robot> element");
  }
  const std::string robot_name = robot->get<std::string>("<xmlattr>.name", "urdf");

  std::set<std::string> links;
  std::vector<UrdfJoint> joints;
  for (const auto& [tag, node] : *robot) {
    if (tag == "link") {
      links.insert(node.get<std::string>("<xmlattr>.name", ""));
    } else if (tag == "joint") {
      joints.push_back(read_joint(node));
    }
  }
  if (links.empty()) {
    throw ModelError("URDF robot '" + robot_name + "' has no <link> elements");
  }

  std::map<std::string, std::vector<const UrdfJoint*>> children;
  std::map<std::string, const UrdfJoint*> parent_joint;
  for (const auto& j : joints) {
    if (!links.count(j.parent) || !links.count(j.child)) {
      throw ModelError("joint '" + j.name + "' references an undeclared link");
    }
    children[j.parent].push_back(&j);
    if (!parent_joint.emplace(j.child, &j).second) {
      throw ModelError("link '" + j.child + "' has more than one parent joint");
    }
  }
  std::vector<std::string> roots;
  for (const auto& l : links) {
    if (!parent_joint.count(l)) {
      roots.push_back(l);
    }
  }
  if (roots.size() != 1) {
    throw ModelError("URDF robot '" + robot_name + "' must have exactly one root link, found " +
                     std::to_string(roots.size()));
  }
  if (!tip_link.empty() && !links.count(tip_link)) {
    throw ModelError("tip link '" + tip_link + "' is not declared in the URDF");
  }

  // With a tip the path is traced back through parent joints, so branches
  // off the path are ignored. Without one the chain is followed from the
  // root and must not branch.
  std::vector<const UrdfJoint*> path;
  if (!tip_link.empty()) {
    for (std::string link = tip_link; link != roots.front();) {
      const UrdfJoint* j = parent_joint.at(link);
      if (path.size() > joints.size()) {
        throw ModelError("URDF kinematic loop detected at link '" + link + "'");
      }
      path.push_back(j);
      link = j->parent;
    }
    std::reverse(path.begin(), path.end());
  } else {
    for (std::string link = roots.front();;) {
      const auto it = children.find(link);
      if (it == children.end()) {
        break;
      }
      if (it->second.size() > 1) {
        std::ostringstream os;
        os << "URDF chain branches at link '" << link << "' (" << it->second.size() << " child joints:";
        for (const auto* c : it->second) {
          os << ' ' << c->name;
        }
        os << "); only serial chains are supported, or pass a tip link";
        throw ModelError(os.str());
      }
      path.push_back(it->second.front());
      link = it->second.front()->child;
    }
  }

  Ets ets;
  std::vector<double> pmin, pmax, vmax;
  int joint_index = 0;
  for (const UrdfJoint* jp : path) {
    const UrdfJoint& j = *jp;
    if (j.type != "fixed" && j.type != "revolute" && j.type != "prismatic") {
      throw ModelError("joint '" + j.name + "' has unsupported type '" + j.type + "'");
    }

    if (j.xyz[0] != 0.0) ets.push_back(tx(j.xyz[0]));
    if (j.xyz[1] != 0.0) ets.push_back(ty(j.xyz[1]));
    if (j.xyz[2] != 0.0) ets.push_back(tz(j.xyz[2]));
    append_rpy(ets, j.rpy);

    if (j.type != "fixed") {
      if (!j.has_limit) {
        throw ModelError("joint '" + j.name + "' is missing its <limit> element");
      }
      append_motion(ets, j, joint_index++);
      pmin.push_back(j.lower);
      pmax.push_back(j.upper);
      vmax.push_back(std::abs(j.velocity));
    }
  }

  const auto n = static_cast<Eigen::Index>(pmin.size());
  JointLimits limits;
  limits.position_min = Eigen::Map<Eigen::VectorXd>(pmin.data(), n);
  limits.position_max = Eigen::Map<Eigen::VectorXd>(pmax.data(), n);
  limits.velocity_max = Eigen::Map<Eigen::VectorXd>(vmax.data(), n);
  limits.velocity_min = -limits.velocity_max;
  return RobotModel(robot_name, std::move(ets), std::move(limits));
}

}  // namespace mmc
