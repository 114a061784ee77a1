#include <gtest/gtest.h>

#include <Eigen/Dense>

#include <cmath>
#include <random>

#include "mmc/control.hpp"
#include "mmc/qp.hpp"
#include "oracles.hpp"

using namespace mmc;

namespace {

Vector6d random_twist(std::mt19937_64& rng, double scale = 0.2) {
  std::normal_distribution<double> g(0.0, scale);
  Vector6d v;
  for (int i = 0; i < 6; ++i) v[i] = g(rng);
  return v;
}

ControllerConfig wide_open(const RobotModel& m, double lambda_delta) {
  ControllerConfig cfg;
  cfg.lambda_delta = FixedSlackPenalty{lambda_delta};
  JointLimits vel = m.limits();
  vel.velocity_min.setConstant(-1e3);
  vel.velocity_max.setConstant(1e3);
  cfg.velocity_limits = vel;
  cfg.slack_min.setConstant(-1e3);
  cfg.slack_max.setConstant(1e3);
  return cfg;
}

// Configuration with every joint outside the damper influence distance.
Eigen::VectorXd mid_range(const RobotModel& m, std::mt19937_64& rng, const ControllerConfig& cfg) {
  return oracle::random_config(m, rng, cfg.rho_i + 0.01);
}

}  // namespace

TEST(Rrmc, IdentityJacobian) {
  Vector6d nu = Vector6d::Zero();
  nu[3] = 1.0;
  const ControlStep s = rrmc_step(Eigen::MatrixXd::Identity(6, 6), nu);
  EXPECT_LT((s.qdot - nu).norm(), 1e-15);
  EXPECT_EQ(s.status, ControlStatus::ok);
}

TEST(Rrmc, MinimumNormToy) {
  const ControlStep s = rrmc_step(Eigen::RowVector2d(1, 1), Eigen::VectorXd::Constant(1, 2.0));
  EXPECT_NEAR(s.qdot[0], 1.0, 1e-14);
  EXPECT_NEAR(s.qdot[1], 1.0, 1e-14);
}

TEST(Rrmc, ResidualOnFullRankJacobians) {
  const RobotModel m = builtin_model("panda");
  std::mt19937_64 rng(31);
  for (int t = 0; t < 100; ++t) {
    const Eigen::VectorXd q = oracle::random_config(m, rng);
    const Vector6d nu = random_twist(rng);
    const ControlStep s = rrmc_step(m, q, nu);
    EXPECT_LT((jacobian(m, q) * s.qdot - nu).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_EQ(s.slack, Vector6d::Zero());
  }
}

TEST(Rrmc, SingularJacobianIsFlagged) {
  Eigen::MatrixXd J = Eigen::MatrixXd::Identity(6, 6);
  J(4, 4) = 0.0;
  const ControlStep s = rrmc_step(J, Vector6d::Ones());
  EXPECT_EQ(s.status, ControlStatus::singular);
  EXPECT_EQ(s.qdot[4], 0.0);
  EXPECT_THROW(rrmc_step(Eigen::MatrixXd::Identity(6, 6), Eigen::VectorXd::Zero(5)), DimensionError);
}

TEST(Pseudoinverse, NullBasisIsOrthonormalComplement) {
  const RobotModel m = builtin_model("panda");
  const Jacobian J = jacobian(m, Eigen::VectorXd::LinSpaced(7, -1, 1));
  const Pseudoinverse P = pseudoinverse(J);
  EXPECT_EQ(P.rank, 6);
  ASSERT_EQ(P.null_basis.cols(), 1);
  EXPECT_LT((J * P.null_basis).norm(), 1e-12);
  EXPECT_NEAR(P.null_basis.norm(), 1.0, 1e-12);
  const Eigen::MatrixXd ref = J.transpose() * (J * J.transpose()).inverse();
  EXPECT_LT((P.pinv - ref).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Park, TaskIsUndisturbedAndNullSpaceIsPure) {
  const RobotModel m = builtin_model("panda");
  const ControllerConfig cfg;
  std::mt19937_64 rng(32);
  for (int t = 0; t < 100; ++t) {
    const Eigen::VectorXd q = oracle::random_config(m, rng);
    const Vector6d nu = random_twist(rng);
    const ControlStep s = park_step(m, q, nu, cfg);
    const Jacobian J = jacobian(m, q);
    EXPECT_LT((J * s.qdot - nu).cwiseAbs().maxCoeff(), 1e-8);
    const Eigen::VectorXd secondary = s.qdot - pseudoinverse(J).pinv * nu;
    EXPECT_LT((J * secondary).cwiseAbs().maxCoeff(), 1e-8);
  }
}

TEST(Park, ManipulabilityAscentWithoutTask) {
  const RobotModel m = builtin_model("panda");
  const ControllerConfig cfg;
  std::mt19937_64 rng(33);
  for (int t = 0; t < 100; ++t) {
    const Eigen::VectorXd q = oracle::random_config(m, rng);
    const ControlStep s = park_step(m, q, Vector6d::Zero(), cfg);
    if (s.status != ControlStatus::ok) continue;
    EXPECT_GE(manipulability_jacobian(m, q).dot(s.qdot), -1e-12);
    EXPECT_GE(s.mdot_predicted, -1e-12);
  }
}

TEST(Park, MatchesProjectorFormula) {
  const RobotModel m = builtin_model("panda");
  const ControllerConfig cfg;
  const Eigen::VectorXd q = Eigen::VectorXd::LinSpaced(7, -0.8, 0.9);
  Vector6d nu;
  nu << 0.1, -0.05, 0.02, 0.1, 0.0, -0.2;
  const Jacobian J = jacobian(m, q);
  const Eigen::MatrixXd Jp = J.transpose() * (J * J.transpose()).inverse();
  const Eigen::MatrixXd N = Eigen::MatrixXd::Identity(7, 7) - Jp * J;
  const Eigen::VectorXd ref = Jp * nu + cfg.park_gain * N * manipulability_jacobian(m, q);
  EXPECT_LT((park_step(m, q, nu, cfg).qdot - ref).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Degeneracy, SquareJacobianControllersCoincide) {
  const RobotModel m = builtin_model("ur5");
  const ControllerConfig cfg;
  std::mt19937_64 rng(34);
  for (int t = 0; t < 100; ++t) {
    const Eigen::VectorXd q = oracle::random_config(m, rng);
    const Vector6d nu = random_twist(rng);
    const ControlStep r = rrmc_step(m, q, nu);
    if (r.status != ControlStatus::ok) continue;
    EXPECT_LT((park_step(m, q, nu, cfg).qdot - r.qdot).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LT((baur_step(m, q, nu, cfg).qdot - r.qdot).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(Baur, EqualsParkAwayFromLimits) {
  const RobotModel m = builtin_model("panda");
  const ControllerConfig cfg;
  std::mt19937_64 rng(35);
  for (int t = 0; t < 20; ++t) {
    const Eigen::VectorXd q = mid_range(m, rng, cfg);
    const Vector6d nu = random_twist(rng);
    EXPECT_EQ(joint_limit_repulsion(m, q, cfg), Eigen::VectorXd::Zero(7));
    EXPECT_LT((baur_step(m, q, nu, cfg).qdot - park_step(m, q, nu, cfg).qdot).cwiseAbs().maxCoeff(), 1e-14);
  }
}

TEST(Baur, RepulsionPushesAwayFromLimit) {
  const RobotModel m = builtin_model("panda");
  const ControllerConfig cfg;
  Eigen::VectorXd q = (m.limits().position_min + m.limits().position_max) / 2;
  q[3] = m.limits().position_max[3] - cfg.rho_s;
  q[1] = m.limits().position_min[1] + deg2rad(26.0);
  const Eigen::VectorXd w = joint_limit_repulsion(m, q, cfg);
  EXPECT_NEAR(w[3], -1.0, 1e-12);
  EXPECT_NEAR(w[1], 0.5, 1e-12);
  EXPECT_EQ(w[0], 0.0);
}

TEST(Damper, Endpoints) {
  const ControllerConfig cfg;
  EXPECT_NEAR(*velocity_damper(cfg.rho_i - 1e-12, cfg), cfg.eta, 1e-9);
  EXPECT_NEAR(*velocity_damper(cfg.rho_s, cfg), 0.0, 1e-15);
  EXPECT_NEAR(*velocity_damper(deg2rad(26.0), cfg), 0.5, 1e-12);
  EXPECT_FALSE(velocity_damper(cfg.rho_i, cfg).has_value());
  EXPECT_FALSE(velocity_damper(1.5, cfg).has_value());
}

TEST(Damper, ConstraintRows) {
  const RobotModel m = builtin_model("panda");
  const ControllerConfig cfg;
  Eigen::VectorXd q = (m.limits().position_min + m.limits().position_max) / 2;
  EXPECT_EQ(damper_constraints(m, q, cfg).A.rows(), 0);

  q[2] = m.limits().position_max[2] - deg2rad(10.0);
  InequalityRows rows = damper_constraints(m, q, cfg);
  ASSERT_EQ(rows.A.rows(), 1);
  EXPECT_EQ(rows.A.cols(), 13);
  EXPECT_EQ(rows.A(0, 2), 1.0);
  EXPECT_EQ(rows.A.row(0).sum(), 1.0);
  EXPECT_NEAR(rows.b[0], 8.0 / 48.0, 1e-12);

  q[2] = m.limits().position_min[2] + cfg.rho_s;
  rows = damper_constraints(m, q, cfg);
  ASSERT_EQ(rows.A.rows(), 1);
  EXPECT_EQ(rows.A(0, 2), -1.0);
  EXPECT_NEAR(rows.b[0], 0.0, 1e-12);
}

TEST(Damper, SafetyUnderRandomCommands) {
  // Joints stay inside their limits when every step obeys the damper rows
  // and dt <= rho_s / (2 eta).
  const RobotModel m = builtin_model("panda");
  const ControllerConfig cfg;
  const double dt = cfg.rho_s / (2 * cfg.eta);
  std::mt19937_64 rng(36);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Eigen::VectorXd q = oracle::random_config(m, rng, 0.1);
  const JointLimits& lim = m.limits();
  for (int step = 0; step < 10000; ++step) {
    Eigen::VectorXd qd(7);
    for (int i = 0; i < 7; ++i) qd[i] = lim.velocity_max[i] * u(rng);
    const InequalityRows rows = damper_constraints(m, q, cfg);
    for (Eigen::Index r = 0; r < rows.A.rows(); ++r) {
      for (int i = 0; i < 7; ++i) {
        if (rows.A(r, i) > 0) qd[i] = std::min(qd[i], rows.b[r]);
        if (rows.A(r, i) < 0) qd[i] = std::max(qd[i], -rows.b[r]);
      }
    }
    q += dt * qd;
    ASSERT_TRUE(((q.array() > lim.position_min.array()) && (q.array() < lim.position_max.array())).all())
        << "step " << step;
  }
}

TEST(SlackPenalty, Modes) {
  ControllerConfig cfg;
  EXPECT_NEAR(slack_penalty(cfg, 0.25), 4.0, 1e-15);
  EXPECT_EQ(slack_penalty(cfg, 0.0), 1e6);
  EXPECT_EQ(slack_penalty(cfg, 1e-9), 1e6);
  cfg.lambda_delta = FixedSlackPenalty{3.0};
  EXPECT_EQ(slack_penalty(cfg, 0.25), 3.0);
}

TEST(Config, Validation) {
  ControllerConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.rho_s = cfg.rho_i;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = ControllerConfig{};
  cfg.lambda_q = 0.0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = ControllerConfig{};
  cfg.lambda_delta = FixedSlackPenalty{-1.0};
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
}

TEST(Mmc, EqualityHoldsEveryStep) {
  const RobotModel m = builtin_model("panda");
  const ControllerConfig cfg;
  std::mt19937_64 rng(37);
  for (int t = 0; t < 100; ++t) {
    const Eigen::VectorXd q = oracle::random_config(m, rng);
    const Vector6d nu = random_twist(rng);
    const ControlStep s = mmc_step(m, q, nu, nu.norm(), cfg);
    if (s.status != ControlStatus::ok) continue;
    EXPECT_LT((jacobian(m, q) * s.qdot + s.slack - nu).cwiseAbs().maxCoeff(), 1e-6);
    EXPECT_TRUE((s.qdot.array() <= m.limits().velocity_max.array() + 1e-9).all());
    EXPECT_TRUE((s.qdot.array() >= m.limits().velocity_min.array() - 1e-9).all());
  }
}

TEST(Mmc, RespectsDamperRows) {
  const RobotModel m = builtin_model("panda");
  const ControllerConfig cfg;
  Eigen::VectorXd q = (m.limits().position_min + m.limits().position_max) / 2;
  q[3] = m.limits().position_max[3] - deg2rad(5.0);
  q[5] = m.limits().position_min[5] + cfg.rho_s;
  std::mt19937_64 rng(38);
  for (int t = 0; t < 20; ++t) {
    const Vector6d nu = random_twist(rng, 0.5);
    const ControlStep s = mmc_step(m, q, nu, nu.norm(), cfg);
    ASSERT_EQ(s.status, ControlStatus::ok);
    EXPECT_LE(s.qdot[3], *velocity_damper(deg2rad(5.0), cfg) + 1e-8);
    EXPECT_GE(s.qdot[5], -1e-8);
  }
}

TEST(Mmc, PricedOutSlackWithoutGradientIsRrmc) {
  const RobotModel m = builtin_model("panda");
  std::mt19937_64 rng(39);
  for (int t = 0; t < 20; ++t) {
    const ControllerConfig cfg = wide_open(m, 1e9);
    const Eigen::VectorXd q = mid_range(m, rng, cfg);
    const Vector6d nu = random_twist(rng);
    const Jacobian J = jacobian(m, q);
    const qp::Solution sol =
        qp::solve(mmc_problem(m, q, J, Eigen::VectorXd::Zero(7), nu, 1e9, cfg));
    ASSERT_EQ(sol.status, qp::Status::optimal);
    EXPECT_LT((sol.x.head(7) - rrmc_step(m, q, nu).qdot).cwiseAbs().maxCoeff(), 1e-4);
  }
}

TEST(Mmc, PricedOutSlackMatchesSlackFreeProblem) {
  // Oracle: KKT solution of min 1/2 lq |qd|^2 - Jm^T qd  s.t.  J qd = nu.
  const RobotModel m = builtin_model("panda");
  std::mt19937_64 rng(40);
  for (int t = 0; t < 20; ++t) {
    const ControllerConfig cfg = wide_open(m, 1e9);
    const Eigen::VectorXd q = mid_range(m, rng, cfg);
    const Vector6d nu = random_twist(rng);
    const Jacobian J = jacobian(m, q);
    const Eigen::VectorXd Jm = manipulability_jacobian(m, q);
    const double lq = cfg.lambda_q;
    const Eigen::VectorXd y = (J * J.transpose()).ldlt().solve(J * Jm - lq * nu);
    const Eigen::VectorXd ref = (Jm - J.transpose() * y) / lq;
    const ControlStep s = mmc_step(m, q, nu, nu.norm(), cfg);
    ASSERT_EQ(s.status, ControlStatus::ok);
    EXPECT_LT((s.qdot - ref).cwiseAbs().maxCoeff(), 1e-4);
    EXPECT_LT(s.slack.norm(), 1e-6);
  }
}

TEST(Mmc, ProblemLayout) {
  const RobotModel m = builtin_model("ur5");
  const ControllerConfig cfg;
  const Eigen::VectorXd q = Eigen::VectorXd::Constant(6, 0.5);
  const Jacobian J = jacobian(m, q);
  const Eigen::VectorXd Jm = manipulability_jacobian(m, q);
  const Vector6d nu = Vector6d::Constant(0.1);
  const qp::QuadraticProgram p = mmc_problem(m, q, J, Jm, nu, 2.5, cfg);
  EXPECT_EQ(p.Q.rows(), 12);
  EXPECT_EQ(p.Q.diagonal().head(6), Eigen::VectorXd::Constant(6, 0.01));
  EXPECT_EQ(p.Q.diagonal().tail(6), Eigen::VectorXd::Constant(6, 2.5));
  EXPECT_EQ(p.Q.topRightCorner(6, 6).norm(), 0.0);
  EXPECT_EQ(p.c.head(6), -Jm);
  EXPECT_EQ(p.c.tail(6).norm(), 0.0);
  EXPECT_EQ(p.A_eq.leftCols(6), Eigen::MatrixXd(J));
  EXPECT_EQ(p.A_eq.rightCols(6), Eigen::MatrixXd::Identity(6, 6));
  EXPECT_EQ(p.b_eq, nu);
  EXPECT_EQ(p.upper.tail(6), Eigen::VectorXd::Constant(6, 10.0));
  EXPECT_EQ(p.upper.head(6), m.limits().velocity_max);
}

TEST(Mmc, SingularConfigurationIsReported) {
  const RobotModel m = builtin_model("planar2r");
  ControllerConfig cfg;
  cfg.axes = AxisSelection::translational_xy;
  const ControlStep s = mmc_step(m, Eigen::Vector2d(0.3, 0.0), Vector6d::Zero(), 0.1, cfg);
  EXPECT_EQ(s.status, ControlStatus::singular);
  EXPECT_EQ(s.qdot, Eigen::VectorXd::Zero(2));
}

TEST(Mmc, PlanarArmIncreasesManipulability) {
  const RobotModel m = builtin_model("planar2r");
  ControllerConfig cfg;
  cfg.axes = AxisSelection::translational_xy;
  const ControlStep s = mmc_step(m, Eigen::Vector2d(0.3, 0.4), Vector6d::Zero(), 1.0, cfg);
  ASSERT_EQ(s.status, ControlStatus::ok);
  EXPECT_GT(s.mdot_predicted, 0.0);
  EXPECT_GT(s.qdot[1], 0.0);
}
