#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "mmc/control.hpp"
#include "mmc/kinematics.hpp"
#include "mmc/model.hpp"

namespace mmc {

/// Invalid experiment or sampling configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ControllerKind { rrmc, park, baur, mmc };
std::string to_string(ControllerKind k);
/// Accepts "rrmc", "park", "baur", "mmc"; throws ConfigError otherwise.
ControllerKind parse_controller(std::string_view name);

struct ArrivalTolerance {
  double translation = 1e-3;           // m
  double rotation = deg2rad(0.5);      // rad
};

struct PBSConfig {
  double gain = 1.0;
  // Per-step twist caps, applied separately to the linear and angular parts.
  double max_linear_speed = 0.5;
  double max_angular_speed = 1.0;
  double dt = 0.02;
  ArrivalTolerance arrival;
  double t_max = 30.0;
  ControllerKind controller = ControllerKind::mmc;
  ControllerConfig control;
  std::uint64_t seed = 0;
  /// Saturate RRMC/Park/Baur joint velocities to the model limits, shrinking
  /// the null-space part first so the end-effector path is kept.
  bool clamp_velocity = true;
  bool record_timing = false;
  /// Capsule radius of the self-collision proxy used when sampling; 0 disables it.
  double capsule_radius = 0.03;

  void validate() const;
};

struct TrialSpec {
  std::string model;
  JointConfig q_start;
  Pose goal;
  std::uint64_t seed = 0;
};

enum class Outcome { success, timeout, joint_limit_violation, qp_infeasible, singular_abort };
std::string to_string(Outcome o);
inline bool failed(Outcome o) { return o != Outcome::success; }

struct TrialResult {
  Outcome outcome = Outcome::timeout;
  double mean_m = 0.0;
  double final_m = 0.0;
  double max_deviation = 0.0;
  double mean_deviation = 0.0;
  int steps = 0;
  double wall_time_per_step = 0.0;  // seconds per controller call

  // Diagnostics not written to the per-trial CSV.
  double final_translation_error = 0.0;
  double final_rotation_error = 0.0;
  double max_task_residual = 0.0;  // |J qdot + slack - nu|_inf over ok MMC steps
  double mean_slack_norm = 0.0;    // mean |slack|_2 over MMC steps
  JointConfig q_final;
};

/// Error twist (p* - p; angle-axis of R* R^T), base frame, no gain.
Vector6d pose_error(const Pose& current, const Pose& goal);
/// Position-based servoing velocity k * pose_error(current, goal).
SpatialVelocity pbs_velocity(const Pose& current, const Pose& goal, double k);
/// Scale the linear and angular halves down to the given speed caps.
SpatialVelocity cap_twist(const SpatialVelocity& nu, double max_linear, double max_angular);

/// Coarse self-collision test: capsules along the segments joining
/// consecutive joint origins; segments sharing an end point are exempt.
bool self_collision(const RobotModel& model, const JointConfig& q, double capsule_radius);

/// Uniform sample inside [q_min + 50 deg, q_max - 50 deg] (revolute joints),
/// rejecting configurations flagged by the self-collision proxy.
JointConfig sample_start_config(const RobotModel& model, std::uint64_t seed, double capsule_radius = 0.03);
Pose sample_goal_pose(const RobotModel& model, std::uint64_t seed, double capsule_radius = 0.03);

/// One controller invocation as used inside a trial.
ControlStep controller_step(ControllerKind kind, const RobotModel& model, const JointConfig& q,
                            const SpatialVelocity& nu, double pose_error_norm, const ControllerConfig& cfg);

/// Saturate step.qdot to the velocity limits: the secondary part is scaled
/// back first, then the whole vector if needed. Returns true if it changed.
bool saturate_velocity(ControlStep& step, const JointLimits& limits);

TrialResult run_trial(const RobotModel& model, const TrialSpec& spec, const PBSConfig& pbs);

/// Deterministic (start, goal) pairs for trial indices 0..count-1.
std::vector<TrialSpec> make_trials(const RobotModel& model, int count, std::uint64_t seed, double capsule_radius);

struct TrialRecord {
  int trial = 0;
  ControllerKind controller = ControllerKind::rrmc;
  TrialResult result;
};

struct ControllerSummary {
  ControllerKind controller = ControllerKind::rrmc;
  int trials = 0;
  int successes = 0;
  double failure_rate = 0.0;  // fraction in [0, 1]
  std::map<std::string, int> outcomes;
  // Averages over non-failed trials; NaN when every trial failed.
  double mean_m = 0.0;
  double mean_final_m = 0.0;
  double mean_max_deviation = 0.0;
  double mean_deviation = 0.0;
  // Relative to RRMC on the same trial set; empty without an RRMC run.
  std::optional<double> uplift_mean_m;
  std::optional<double> uplift_final_m;
  double median_ms_per_step = 0.0;
};

struct ExperimentSummary {
  std::string model;
  int trials = 0;
  std::uint64_t seed = 0;
  std::vector<ControllerSummary> controllers;
  PBSConfig pbs;

  const ControllerSummary& at(ControllerKind k) const;
};

struct ExperimentResult {
  std::vector<TrialSpec> specs;
  std::vector<TrialRecord> records;  // trial-major, controllers in request order
  ExperimentSummary summary;
};

/// Run every controller on the same N sampled trials. `jobs` worker threads;
/// results do not depend on the job count.
ExperimentResult run_experiment(const RobotModel& model, int n_trials, const std::vector<ControllerKind>& controllers,
                                const PBSConfig& pbs, int jobs = 1);

ExperimentSummary summarize(const std::string& model, const std::vector<TrialRecord>& records,
                            const std::vector<ControllerKind>& controllers, int n_trials, const PBSConfig& pbs);

/// Per-trial CSV: trial,controller,outcome,mean_m,final_m,max_dev,mean_dev,steps,ms_per_step.
/// ms_per_step is written as 0 unless timing was recorded.
void write_trials_csv(std::ostream& out, const std::vector<TrialRecord>& records, bool timing);
void write_summary_json(std::ostream& out, const ExperimentSummary& summary);
void write_summary_table(std::ostream& out, const ExperimentSummary& summary);

}  // namespace mmc
