#include <numbers>

#include "bundled_data.hpp"
#include "mmc/model.hpp"

namespace mmc {

namespace {

RobotModel planar2r() {
  using std::numbers::pi;
  Ets ets{
      ElementaryTransform::variable(TransformKind::rotation, Axis::z, 0),
      tx(1.0),
      ElementaryTransform::variable(TransformKind::rotation, Axis::z, 1),
      tx(1.0),
  };
  JointLimits limits;
  limits.position_min = Eigen::Vector2d(-pi, -pi);
  limits.position_max = Eigen::Vector2d(pi, pi);
  limits.velocity_min = Eigen::Vector2d(-2.0, -2.0);
  limits.velocity_max = Eigen::Vector2d(2.0, 2.0);
  return RobotModel("planar2r", std::move(ets), std::move(limits));
}

}  // namespace

std::vector<std::string> builtin_model_names() { return {"panda", "ur5", "planar2r"}; }

RobotModel builtin_model(std::string_view name) {
  if (name == "panda") {
    return parse_urdf(bundled::kPandaUrdf, "panda_hand_tcp");
  }
  if (name == "ur5") {
    return load_dh(bundled::kUr5Dh, "ur5");
  }
  if (name == "planar2r") {
    return planar2r();
  }
  throw ModelError("unknown builtin model '" + std::string(name) + "' (available: panda, ur5, planar2r)");
}

}  // namespace mmc
