#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "mmc/servo.hpp"

namespace mmc {

namespace {

nlohmann::json number_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

nlohmann::json optional_number(const std::optional<double>& v) {
  return v ? number_or_null(*v) : nlohmann::json(nullptr);
}

std::string lambda_delta_text(const ControllerConfig& cfg) {
  std::ostringstream os;
  if (const auto* fixed = std::get_if<FixedSlackPenalty>(&cfg.lambda_delta)) {
    os << "fixed(" << fixed->value << ")";
  } else {
    os << "inverse_error(cap=" << std::get<InverseErrorSlackPenalty>(cfg.lambda_delta).max_cap << ")";
  }
  return os.str();
}

std::string percent(double fraction, bool sign) {
  if (!std::isfinite(fraction)) {
    return "n/a";
  }
  std::ostringstream os;
  os << std::fixed << std::setprecision(1);
  if (sign && fraction >= 0.0) {
    os << '+';
  }
  os << 100.0 * fraction << '%';
  return os.str();
}

std::string sig6(double v) {
  if (!std::isfinite(v)) {
    return "n/a";
  }
  std::ostringstream os;
  os << std::setprecision(6) << v;
  return os.str();
}

}  // namespace

void write_trials_csv(std::ostream& out, const std::vector<TrialRecord>& records, bool timing) {
  out << "trial,controller,outcome,mean_m,final_m,max_dev,mean_dev,steps,ms_per_step\n";
  std::ostringstream row;
  row << std::setprecision(17);
  for (const auto& rec : records) {
    const TrialResult& r = rec.result;
    row.str("");
    row << rec.trial << ',' << to_string(rec.controller) << ',' << to_string(r.outcome) << ',' << r.mean_m << ','
        << r.final_m << ',' << r.max_deviation << ',' << r.mean_deviation << ',' << r.steps << ','
        << (timing ? r.wall_time_per_step * 1e3 : 0.0) << '\n';
    out << row.str();
  }
}

void write_summary_json(std::ostream& out, const ExperimentSummary& summary) {
  const PBSConfig& pbs = summary.pbs;
  nlohmann::ordered_json doc;
  doc["model"] = summary.model;
  doc["trials"] = summary.trials;
  doc["seed"] = summary.seed;
  doc["metadata"] = {
      {"mean_manipulability_excludes_failed_trials", true},
      {"velocity_saturation_non_qp_controllers", pbs.clamp_velocity},
      {"timing_recorded", pbs.record_timing},
      {"manipulability_axes", pbs.control.axes == AxisSelection::all ? "all" : "subset"},
      {"servo_gain", pbs.gain},
      {"max_linear_speed", pbs.max_linear_speed},
      {"max_angular_speed", pbs.max_angular_speed},
      {"dt", pbs.dt},
      {"t_max", pbs.t_max},
      {"arrival_translation", pbs.arrival.translation},
      {"arrival_rotation", pbs.arrival.rotation},
      {"lambda_q", pbs.control.lambda_q},
      {"lambda_delta", lambda_delta_text(pbs.control)},
      {"eta", pbs.control.eta},
      {"rho_i", pbs.control.rho_i},
      {"rho_s", pbs.control.rho_s},
      {"park_gain", pbs.control.park_gain},
      {"capsule_radius", pbs.capsule_radius},
  };
  nlohmann::ordered_json controllers = nlohmann::ordered_json::array();
  for (const auto& c : summary.controllers) {
    nlohmann::ordered_json entry;
    entry["controller"] = to_string(c.controller);
    entry["trials"] = c.trials;
    entry["successes"] = c.successes;
    entry["failure_rate"] = c.failure_rate;
    entry["outcomes"] = c.outcomes;
    entry["mean_manipulability"] = number_or_null(c.mean_m);
    entry["mean_final_manipulability"] = number_or_null(c.mean_final_m);
    entry["uplift_mean_manipulability"] = optional_number(c.uplift_mean_m);
    entry["uplift_final_manipulability"] = optional_number(c.uplift_final_m);
    entry["mean_max_deviation"] = number_or_null(c.mean_max_deviation);
    entry["mean_deviation"] = number_or_null(c.mean_deviation);
    entry["median_ms_per_step"] = c.median_ms_per_step;
    controllers.push_back(std::move(entry));
  }
  doc["controllers"] = std::move(controllers);
  out << doc.dump(2) << '\n';
}

void write_summary_table(std::ostream& out, const ExperimentSummary& summary) {
  out << "Model: " << summary.model << "   trials: " << summary.trials << "   seed: " << summary.seed << '\n';
  const int w = 24;
  out << std::left << std::setw(28) << "Measure";
  for (const auto& c : summary.controllers) {
    out << std::setw(w) << to_string(c.controller);
  }
  out << '\n';

  auto cell = [](double v, const std::optional<double>& uplift) {
    std::string s = sig6(v);
    if (uplift) {
      s += ", " + percent(*uplift, true);
    }
    return s;
  };
  out << std::setw(28) << "Mean Manipulability";
  for (const auto& c : summary.controllers) out << std::setw(w) << cell(c.mean_m, c.uplift_mean_m);
  out << '\n' << std::setw(28) << "Mean Final Manipulability";
  for (const auto& c : summary.controllers) out << std::setw(w) << cell(c.mean_final_m, c.uplift_final_m);
  out << '\n' << std::setw(28) << "Failures";
  for (const auto& c : summary.controllers) out << std::setw(w) << percent(c.failure_rate, false);
  out << '\n' << std::setw(28) << "Mean Max Deviation [m]";
  for (const auto& c : summary.controllers) out << std::setw(w) << sig6(c.mean_max_deviation);
  out << '\n' << std::setw(28) << "Mean Deviation [m]";
  for (const auto& c : summary.controllers) out << std::setw(w) << sig6(c.mean_deviation);
  if (summary.pbs.record_timing) {
    out << '\n' << std::setw(28) << "Median ms/step";
    for (const auto& c : summary.controllers) out << std::setw(w) << sig6(c.median_ms_per_step);
  }
  out << std::right << '\n';
}

}  // namespace mmc
