#include <cmath>
#include <numbers>
#include <sstream>
#include <string>

#include "mmc/model.hpp"

namespace mmc {

namespace {

constexpr double kPi = std::numbers::pi;
// Angles in DH tables are often written with a handful of digits, so allow a
// little slack at the +-pi boundary.
constexpr double kAngleSlack = 1e-6;

void check_angle(double v, const char* what, size_t row) {
  if (!(std::abs(v) <= kPi + kAngleSlack)) {
    std::ostringstream os;
    os << "DH row " << row << ": " << what << " = " << v << " is outside [-pi, pi]";
    throw ModelError(os.str());
  }
}

}  // namespace

RobotModel dh_to_ets(const std::vector<DHRow>& rows, std::string name) {
  if (rows.empty()) {
    throw ModelError("DH table has no rows");
  }
  const auto n = static_cast<Eigen::Index>(rows.size());
  JointLimits limits{Eigen::VectorXd(n), Eigen::VectorXd(n), Eigen::VectorXd(n), Eigen::VectorXd(n)};

  Ets ets;
  for (size_t j = 0; j < rows.size(); ++j) {
    const DHRow& row = rows[j];
    check_angle(row.theta_offset, "theta_offset", j);
    check_angle(row.alpha, "alpha", j);
    const int joint = static_cast<int>(j);

    if (row.theta_offset != 0.0) {
      ets.push_back(rz(row.theta_offset));
    }
    if (row.joint_type == JointType::revolute) {
      ets.push_back(ElementaryTransform::variable(TransformKind::rotation, Axis::z, joint));
      if (row.d != 0.0) {
        ets.push_back(tz(row.d));
      }
    } else {
      if (row.d != 0.0) {
        ets.push_back(tz(row.d));
      }
      ets.push_back(ElementaryTransform::variable(TransformKind::translation, Axis::z, joint));
    }
    if (row.a != 0.0) {
      ets.push_back(tx(row.a));
    }
    if (row.alpha != 0.0) {
      ets.push_back(rx(row.alpha));
    }

    const bool revolute = row.joint_type == JointType::revolute;
    const double default_pos = revolute ? kPi : 1.0;
    const double default_vel = revolute ? kPi : 1.0;
    const auto i = static_cast<Eigen::Index>(j);
    limits.position_min[i] = row.position_min.value_or(-default_pos);
    limits.position_max[i] = row.position_max.value_or(default_pos);
    const double vmax = row.velocity_max.value_or(default_vel);
    limits.velocity_min[i] = -vmax;
    limits.velocity_max[i] = vmax;
  }
  return RobotModel(std::move(name), std::move(ets), std::move(limits));
}

std::vector<DHRow> parse_dh_table(std::string_view text) {
  std::vector<DHRow> rows;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) {
      line.erase(hash);
    }
    std::istringstream fields(line);
    std::string type;
    if (!(fields >> type)) {
      continue;
    }
    DHRow row;
    if (type == "R" || type == "r" || type == "revolute") {
      row.joint_type = JointType::revolute;
    } else if (type == "P" || type == "p" || type == "prismatic") {
      row.joint_type = JointType::prismatic;
    } else {
      throw ModelError("DH line " + std::to_string(line_no) + ": unknown joint type '" + type + "'");
    }

    std::vector<double> values;
    std::string token;
    while (fields >> token) {
      try {
        size_t used = 0;
        values.push_back(std::stod(token, &used));
        if (used != token.size()) {
          throw std::invalid_argument(token);
        }
      } catch (const std::exception&) {
        throw ModelError("DH line " + std::to_string(line_no) + ": '" + token + "' is not a number");
      }
    }
    if (values.size() != 4 && values.size() != 7) {
      throw ModelError("DH line " + std::to_string(line_no) + ": expected 4 or 7 numeric columns, found " +
                       std::to_string(values.size()));
    }
    row.theta_offset = values[0];
    row.d = values[1];
    row.a = values[2];
    row.alpha = values[3];
    if (values.size() == 7) {
      row.position_min = values[4];
      row.position_max = values[5];
      row.velocity_max = values[6];
    }
    rows.push_back(row);
  }
  return rows;
}

RobotModel load_dh(std::string_view text, std::string name) {
  return dh_to_ets(parse_dh_table(text), std::move(name));
}

}  // namespace mmc
