#include "mmc/servo.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <thread>

namespace mmc {

std::string to_string(ControllerKind k) {
  switch (k) {
    case ControllerKind::rrmc: return "rrmc";
    case ControllerKind::park: return "park";
    case ControllerKind::baur: return "baur";
    case ControllerKind::mmc: return "mmc";
  }
  return "unknown";
}

ControllerKind parse_controller(std::string_view name) {
  if (name == "rrmc") return ControllerKind::rrmc;
  if (name == "park") return ControllerKind::park;
  if (name == "baur") return ControllerKind::baur;
  if (name == "mmc") return ControllerKind::mmc;
  throw ConfigError("unknown controller '" + std::string(name) + "' (expected rrmc, park, baur or mmc)");
}

std::string to_string(Outcome o) {
  switch (o) {
    case Outcome::success: return "success";
    case Outcome::timeout: return "timeout";
    case Outcome::joint_limit_violation: return "joint_limit_violation";
    case Outcome::qp_infeasible: return "qp_infeasible";
    case Outcome::singular_abort: return "singular_abort";
  }
  return "unknown";
}

void PBSConfig::validate() const {
  if (!(dt > 0.0) || !(t_max > 0.0)) {
    throw ConfigError("dt and t_max must be positive");
  }
  if (!(arrival.translation > 0.0) || !(arrival.rotation > 0.0)) {
    throw ConfigError("arrival tolerances must be positive");
  }
  if (!(gain > 0.0) || !(max_linear_speed > 0.0) || !(max_angular_speed > 0.0)) {
    throw ConfigError("servo gain and twist caps must be positive");
  }
  if (!(capsule_radius >= 0.0)) {
    throw ConfigError("capsule radius must be non-negative");
  }
  try {
    control.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

Vector6d pose_error(const Pose& current, const Pose& goal) {
  Vector6d e;
  e.head<3>() = goal.translation - current.translation;
  const Eigen::AngleAxisd aa(Eigen::Matrix3d(goal.rotation * current.rotation.transpose()));
  e.tail<3>() = aa.angle() * aa.axis();
  return e;
}

SpatialVelocity pbs_velocity(const Pose& current, const Pose& goal, double k) { return k * pose_error(current, goal); }

SpatialVelocity cap_twist(const SpatialVelocity& nu, double max_linear, double max_angular) {
  SpatialVelocity out = nu;
  const double lin = nu.head<3>().norm();
  const double ang = nu.tail<3>().norm();
  if (lin > max_linear) out.head<3>() *= max_linear / lin;
  if (ang > max_angular) out.tail<3>() *= max_angular / ang;
  return out;
}

namespace {

// Closest distance between segments [p1,q1] and [p2,q2] (Ericson, RTCD 5.1.9).
double segment_distance(const Eigen::Vector3d& p1, const Eigen::Vector3d& q1, const Eigen::Vector3d& p2,
                        const Eigen::Vector3d& q2) {
  constexpr double kEps = 1e-12;
  const Eigen::Vector3d d1 = q1 - p1;
  const Eigen::Vector3d d2 = q2 - p2;
  const Eigen::Vector3d r = p1 - p2;
  const double a = d1.squaredNorm();
  const double e = d2.squaredNorm();
  const double f = d2.dot(r);
  double s = 0.0;
  double t = 0.0;
  if (a <= kEps && e <= kEps) {
    return r.norm();
  }
  if (a <= kEps) {
    t = std::clamp(f / e, 0.0, 1.0);
  } else {
    const double c = d1.dot(r);
    if (e <= kEps) {
      s = std::clamp(-c / a, 0.0, 1.0);
    } else {
      const double b = d1.dot(d2);
      const double denom = a * e - b * b;
      s = denom != 0.0 ? std::clamp((b * f - c * e) / denom, 0.0, 1.0) : 0.0;
      t = (b * s + f) / e;
      if (t < 0.0) {
        t = 0.0;
        s = std::clamp(-c / a, 0.0, 1.0);
      } else if (t > 1.0) {
        t = 1.0;
        s = std::clamp((b - c) / a, 0.0, 1.0);
      }
    }
  }
  return ((p1 + s * d1) - (p2 + t * d2)).norm();
}

double point_segment_distance(const Eigen::Vector3d& p, const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
  const Eigen::Vector3d ab = b - a;
  const double len2 = ab.squaredNorm();
  if (len2 == 0.0) {
    return (p - a).norm();
  }
  const double t = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
  return (p - (a + t * ab)).norm();
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

bool self_collision(const RobotModel& model, const JointConfig& q, double capsule_radius) {
  if (capsule_radius <= 0.0) {
    return false;
  }
  const ChainFrames frames = chain_frames(model, q);
  std::vector<Eigen::Vector3d> points{Eigen::Vector3d::Zero()};
  auto add = [&](const Eigen::Vector3d& p) {
    if ((p - points.back()).norm() > 1e-9) {
      points.push_back(p);
    }
  };
  for (const auto& o : frames.origins) {
    add(o);
  }
  add(frames.end_effector.translation);

  const double clearance = 2.0 * capsule_radius;
  const size_t segments = points.size() - 1;
  for (size_t i = 0; i < segments; ++i) {
    for (size_t j = i + 2; j < segments; ++j) {
      if (segment_distance(points[i], points[i + 1], points[j], points[j + 1]) < clearance) {
        return true;
      }
    }
  }
  return false;
}

JointConfig sample_start_config(const RobotModel& model, std::uint64_t seed, double capsule_radius) {
  const JointLimits& lim = model.limits();
  const int n = model.n();
  Eigen::VectorXd lo(n);
  Eigen::VectorXd hi(n);
  for (int i = 0; i < n; ++i) {
    const double margin = model.joint_type(i) == JointType::revolute ? deg2rad(50.0) : 0.0;
    lo[i] = lim.position_min[i] + margin;
    hi[i] = lim.position_max[i] - margin;
    if (!(lo[i] < hi[i])) {
      throw ConfigError("joint " + std::to_string(i) + " of model '" + model.name() +
                        "': limits leave no room for the 50 degree sampling margin");
    }
  }

  std::uint64_t state = seed;
  constexpr int kMaxAttempts = 10000;
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    JointConfig q(n);
    for (int i = 0; i < n; ++i) {
      state = splitmix64(state);
      // 53 random bits -> [0, 1)
      const double u = static_cast<double>(state >> 11) * 0x1.0p-53;
      q[i] = lo[i] + (hi[i] - lo[i]) * u;
    }
    if (!self_collision(model, q, capsule_radius)) {
      return q;
    }
  }
  throw ConfigError("could not sample a collision-free configuration for model '" + model.name() + "'");
}

Pose sample_goal_pose(const RobotModel& model, std::uint64_t seed, double capsule_radius) {
  return forward_kinematics(model, sample_start_config(model, seed, capsule_radius));
}

ControlStep controller_step(ControllerKind kind, const RobotModel& model, const JointConfig& q,
                            const SpatialVelocity& nu, double pose_error_norm, const ControllerConfig& cfg) {
  switch (kind) {
    case ControllerKind::rrmc: return rrmc_step(model, q, nu);
    case ControllerKind::park: return park_step(model, q, nu, cfg);
    case ControllerKind::baur: return baur_step(model, q, nu, cfg);
    case ControllerKind::mmc: return mmc_step(model, q, nu, pose_error_norm, cfg);
  }
  throw std::logic_error("unhandled controller");
}

bool saturate_velocity(ControlStep& step, const JointLimits& limits) {
  const Eigen::VectorXd& vmin = limits.velocity_min;
  const Eigen::VectorXd& vmax = limits.velocity_max;
  if (((step.qdot.array() >= vmin.array()) && (step.qdot.array() <= vmax.array())).all()) {
    return false;
  }
  Eigen::VectorXd task = step.qdot - step.qdot_secondary;
  const Eigen::VectorXd& sec = step.qdot_secondary;

  // Largest alpha in [0, 1] with vmin <= task + alpha * sec <= vmax.
  double alpha = 1.0;
  for (Eigen::Index i = 0; i < task.size(); ++i) {
    if (task[i] > vmax[i] || task[i] < vmin[i]) {
      alpha = 0.0;
      break;
    }
    if (sec[i] > 0.0) {
      alpha = std::min(alpha, (vmax[i] - task[i]) / sec[i]);
    } else if (sec[i] < 0.0) {
      alpha = std::min(alpha, (vmin[i] - task[i]) / sec[i]);
    }
  }
  alpha = std::max(alpha, 0.0);

  double beta = 1.0;
  for (Eigen::Index i = 0; i < task.size(); ++i) {
    if (task[i] > vmax[i]) beta = std::min(beta, vmax[i] / task[i]);
    if (task[i] < vmin[i]) beta = std::min(beta, vmin[i] / task[i]);
  }
  step.qdot_secondary = alpha * sec;
  step.qdot = beta * task + step.qdot_secondary;
  return true;
}

TrialResult run_trial(const RobotModel& model, const TrialSpec& spec, const PBSConfig& pbs) {
  if (spec.q_start.size() != model.n()) {
    throw DimensionError("trial start configuration does not match the model");
  }
  const int max_steps = static_cast<int>(std::ceil(pbs.t_max / pbs.dt - 1e-9));
  const Eigen::Vector3d start = forward_kinematics(model, spec.q_start).translation;
  const Eigen::Vector3d goal = spec.goal.translation;

  TrialResult result;
  JointConfig q = spec.q_start;
  double sum_m = 0.0;
  double sum_dev = 0.0;
  double sum_slack = 0.0;
  int samples = 0;
  int mmc_steps = 0;
  double controller_seconds = 0.0;

  while (true) {
    const ChainFrames frames = chain_frames(model, q);
    const Pose& pose = frames.end_effector;
    const Jacobian J = jacobian(model, q);
    const double m = manipulability(J, pbs.control.axes);
    const double dev = point_segment_distance(pose.translation, start, goal);
    sum_m += m;
    sum_dev += dev;
    ++samples;
    result.final_m = m;
    result.max_deviation = std::max(result.max_deviation, dev);

    const Vector6d err = pose_error(pose, spec.goal);
    result.final_translation_error = err.head<3>().norm();
    result.final_rotation_error = err.tail<3>().norm();
    if (result.final_translation_error < pbs.arrival.translation &&
        result.final_rotation_error < pbs.arrival.rotation) {
      result.outcome = Outcome::success;
      break;
    }
    if (result.steps >= max_steps) {
      result.outcome = Outcome::timeout;
      break;
    }

    const SpatialVelocity nu = cap_twist(pbs.gain * err, pbs.max_linear_speed, pbs.max_angular_speed);
    const auto t0 = std::chrono::steady_clock::now();
    ControlStep step = controller_step(pbs.controller, model, q, nu, err.norm(), pbs.control);
    controller_seconds += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    if (step.status == ControlStatus::singular) {
      result.outcome = Outcome::singular_abort;
      break;
    }
    if (step.status == ControlStatus::infeasible) {
      result.outcome = Outcome::qp_infeasible;
      break;
    }
    if (pbs.controller == ControllerKind::mmc) {
      const double residual = (J * step.qdot + step.slack - nu).cwiseAbs().maxCoeff();
      result.max_task_residual = std::max(result.max_task_residual, residual);
      sum_slack += step.slack.norm();
      ++mmc_steps;
    } else if (pbs.clamp_velocity) {
      saturate_velocity(step, model.limits());
    }

    q += pbs.dt * step.qdot;
    ++result.steps;
    if (!model.limits().within_position(q)) {
      result.outcome = Outcome::joint_limit_violation;
      break;
    }
  }

  result.mean_m = sum_m / samples;
  result.mean_deviation = sum_dev / samples;
  result.mean_slack_norm = mmc_steps > 0 ? sum_slack / mmc_steps : 0.0;
  result.wall_time_per_step = result.steps > 0 ? controller_seconds / result.steps : 0.0;
  result.q_final = q;
  return result;
}

std::vector<TrialSpec> make_trials(const RobotModel& model, int count, std::uint64_t seed, double capsule_radius) {
  std::vector<TrialSpec> specs;
  specs.reserve(static_cast<size_t>(count));
  for (int i = 0; i < count; ++i) {
    const auto index = static_cast<std::uint64_t>(i);
    const std::uint64_t trial_seed = splitmix64(seed ^ splitmix64(index));
    TrialSpec spec;
    spec.model = model.name();
    spec.seed = trial_seed;
    spec.q_start = sample_start_config(model, splitmix64(trial_seed ^ 0x5354415254ULL), capsule_radius);
    spec.goal = sample_goal_pose(model, splitmix64(trial_seed ^ 0x474f414cULL), capsule_radius);
    specs.push_back(std::move(spec));
  }
  return specs;
}

const ControllerSummary& ExperimentSummary::at(ControllerKind k) const {
  for (const auto& c : controllers) {
    if (c.controller == k) {
      return c;
    }
  }
  throw std::out_of_range("controller " + to_string(k) + " was not part of the experiment");
}

ExperimentSummary summarize(const std::string& model, const std::vector<TrialRecord>& records,
                            const std::vector<ControllerKind>& controllers, int n_trials, const PBSConfig& pbs) {
  ExperimentSummary summary;
  summary.model = model;
  summary.trials = n_trials;
  summary.seed = pbs.seed;
  summary.pbs = pbs;
  const double nan = std::numeric_limits<double>::quiet_NaN();

  for (const ControllerKind kind : controllers) {
    ControllerSummary s;
    s.controller = kind;
    for (const char* o : {"success", "timeout", "joint_limit_violation", "qp_infeasible", "singular_abort"}) {
      s.outcomes[o] = 0;
    }
    double sum_m = 0.0, sum_final = 0.0, sum_max_dev = 0.0, sum_dev = 0.0;
    std::vector<double> ms;
    for (const auto& rec : records) {
      if (rec.controller != kind) {
        continue;
      }
      ++s.trials;
      ++s.outcomes[to_string(rec.result.outcome)];
      if (rec.result.steps > 0) {
        ms.push_back(rec.result.wall_time_per_step * 1e3);
      }
      if (failed(rec.result.outcome)) {
        continue;
      }
      ++s.successes;
      sum_m += rec.result.mean_m;
      sum_final += rec.result.final_m;
      sum_max_dev += rec.result.max_deviation;
      sum_dev += rec.result.mean_deviation;
    }
    s.failure_rate = s.trials > 0 ? static_cast<double>(s.trials - s.successes) / s.trials : 0.0;
    s.mean_m = s.successes > 0 ? sum_m / s.successes : nan;
    s.mean_final_m = s.successes > 0 ? sum_final / s.successes : nan;
    s.mean_max_deviation = s.successes > 0 ? sum_max_dev / s.successes : nan;
    s.mean_deviation = s.successes > 0 ? sum_dev / s.successes : nan;
    if (pbs.record_timing && !ms.empty()) {
      std::sort(ms.begin(), ms.end());
      const size_t mid = ms.size() / 2;
      s.median_ms_per_step = ms.size() % 2 ? ms[mid] : 0.5 * (ms[mid - 1] + ms[mid]);
    }
    summary.controllers.push_back(std::move(s));
  }

  const auto rrmc = std::find_if(summary.controllers.begin(), summary.controllers.end(),
                                 [](const auto& c) { return c.controller == ControllerKind::rrmc; });
  if (rrmc != summary.controllers.end()) {
    const double base_m = rrmc->mean_m;
    const double base_final = rrmc->mean_final_m;
    for (auto& c : summary.controllers) {
      c.uplift_mean_m = (c.mean_m - base_m) / base_m;
      c.uplift_final_m = (c.mean_final_m - base_final) / base_final;
    }
  }
  return summary;
}

ExperimentResult run_experiment(const RobotModel& model, int n_trials, const std::vector<ControllerKind>& controllers,
                                const PBSConfig& pbs, int jobs) {
  if (n_trials < 1) {
    throw ConfigError("an experiment needs at least one trial");
  }
  if (controllers.empty()) {
    throw ConfigError("an experiment needs at least one controller");
  }
  pbs.validate();

  ExperimentResult out;
  out.specs = make_trials(model, n_trials, pbs.seed, pbs.capsule_radius);

  const size_t per_trial = controllers.size();
  const size_t total = out.specs.size() * per_trial;
  out.records.resize(total);

  std::atomic<size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&]() {
    for (size_t task = next++; task < total; task = next++) {
      const size_t trial = task / per_trial;
      PBSConfig cfg = pbs;
      cfg.controller = controllers[task % per_trial];
      TrialRecord& rec = out.records[task];
      rec.trial = static_cast<int>(trial);
      rec.controller = cfg.controller;
      try {
        rec.result = run_trial(model, out.specs[trial], cfg);
      } catch (...) {
        const std::lock_guard lock(error_mutex);
        if (!error) {
          error = std::current_exception();
        }
        next = total;
      }
    }
  };
  const int threads = std::max(1, std::min<int>(jobs, static_cast<int>(total)));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < threads; ++t) {
      pool.emplace_back(worker);
    }
  }
  if (error) {
    std::rethrow_exception(error);
  }

  out.summary = summarize(model.name(), out.records, controllers, n_trials, pbs);
  return out;
}

}  // namespace mmc
