// Dual active-set QP solver after Goldfarb & Idnani (Math. Programming 27,
// 1983). All constraints are handled in the form n^T x >= b (equalities as
// n^T x = b). The factorisation keeps J = L^-T Qr and an upper-triangular R
// with J^T N_active = [R; 0], where Q = L L^T.

#include "mmc/qp.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace mmc::qp {

std::string to_string(Status s) {
  switch (s) {
    case Status::optimal: return "optimal";
    case Status::infeasible: return "infeasible";
    case Status::max_iterations: return "max_iterations";
  }
  return "unknown";
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

enum class Origin { equality, inequality, lower, upper };

struct ConstraintSet {
  Eigen::MatrixXd normals;  // one column per constraint
  Eigen::VectorXd rhs;
  std::vector<Origin> origin;
  std::vector<Eigen::Index> source_row;
  int num_eq = 0;
};

void validate(const QuadraticProgram& p) {
  const Eigen::Index k = p.c.size();
  if (k == 0) {
    throw std::invalid_argument("QP has no variables");
  }
  if (p.Q.rows() != k || p.Q.cols() != k) {
    throw std::invalid_argument("QP: Q must be k x k");
  }
  if ((p.Q - p.Q.transpose()).cwiseAbs().maxCoeff() > 1e-10 * std::max(1.0, p.Q.cwiseAbs().maxCoeff())) {
    throw std::invalid_argument("QP: Q is not symmetric");
  }
  if (p.A_eq.rows() != p.b_eq.size() || (p.A_eq.rows() > 0 && p.A_eq.cols() != k)) {
    throw std::invalid_argument("QP: equality block has inconsistent dimensions");
  }
  if (p.A_in.rows() != p.b_in.size() || (p.A_in.rows() > 0 && p.A_in.cols() != k)) {
    throw std::invalid_argument("QP: inequality block has inconsistent dimensions");
  }
  if ((p.lower.size() != 0 && p.lower.size() != k) || (p.upper.size() != 0 && p.upper.size() != k)) {
    throw std::invalid_argument("QP: bounds must be empty or have k entries");
  }
  if (p.lower.size() == k && p.upper.size() == k && (p.lower.array() > p.upper.array()).any()) {
    throw std::invalid_argument("QP: lower bound exceeds upper bound");
  }
}

ConstraintSet gather(const QuadraticProgram& p) {
  const Eigen::Index k = p.c.size();
  std::vector<Eigen::VectorXd> cols;
  ConstraintSet set;
  std::vector<double> rhs;
  auto push = [&](Eigen::VectorXd n, double b, Origin o, Eigen::Index row) {
    cols.push_back(std::move(n));
    rhs.push_back(b);
    set.origin.push_back(o);
    set.source_row.push_back(row);
  };
  for (Eigen::Index i = 0; i < p.A_eq.rows(); ++i) {
    push(p.A_eq.row(i).transpose(), p.b_eq[i], Origin::equality, i);
  }
  set.num_eq = static_cast<int>(p.A_eq.rows());
  for (Eigen::Index i = 0; i < p.A_in.rows(); ++i) {
    push(-p.A_in.row(i).transpose(), -p.b_in[i], Origin::inequality, i);
  }
  // Box constraints folded into the same path as general inequalities.
  for (Eigen::Index i = 0; i < p.lower.size(); ++i) {
    if (std::isfinite(p.lower[i])) {
      push(Eigen::VectorXd::Unit(k, i), p.lower[i], Origin::lower, i);
    }
  }
  for (Eigen::Index i = 0; i < p.upper.size(); ++i) {
    if (std::isfinite(p.upper[i])) {
      push(-Eigen::VectorXd::Unit(k, i), -p.upper[i], Origin::upper, i);
    }
  }
  set.normals.resize(k, static_cast<Eigen::Index>(cols.size()));
  for (size_t j = 0; j < cols.size(); ++j) {
    set.normals.col(static_cast<Eigen::Index>(j)) = cols[j];
  }
  set.rhs = Eigen::Map<Eigen::VectorXd>(rhs.data(), static_cast<Eigen::Index>(rhs.size()));
  return set;
}

class ActiveSetFactor {
 public:
  ActiveSetFactor(const Eigen::MatrixXd& L)
      : k_(L.rows()), R_(Eigen::MatrixXd::Zero(k_, k_)) {
    // J = L^-T
    J_ = L.transpose().triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(k_, k_));
  }

  Eigen::Index size() const { return iq_; }

  // d = J^T n, primal direction z and dual direction r for candidate n.
  void directions(const Eigen::VectorXd& n, Eigen::VectorXd& d, Eigen::VectorXd& z, Eigen::VectorXd& r) const {
    d = J_.transpose() * n;
    z = J_.rightCols(k_ - iq_) * d.tail(k_ - iq_);
    if (iq_ > 0) {
      r = R_.topLeftCorner(iq_, iq_).triangularView<Eigen::Upper>().solve(d.head(iq_));
    } else {
      r.resize(0);
    }
  }

  // Append a constraint whose J^T n is `d`. Returns false if it is linearly
  // dependent on the active set.
  bool add(Eigen::VectorXd d) {
    if (iq_ >= k_) {
      return false;
    }
    for (Eigen::Index j = k_ - 1; j > iq_; --j) {
      const double a = d[j - 1];
      const double b = d[j];
      const double h = std::hypot(a, b);
      if (h == 0.0) {
        continue;
      }
      const double c = a / h;
      const double s = b / h;
      d[j - 1] = h;
      d[j] = 0.0;
      for (Eigen::Index row = 0; row < k_; ++row) {
        const double t1 = J_(row, j - 1);
        const double t2 = J_(row, j);
        J_(row, j - 1) = c * t1 + s * t2;
        J_(row, j) = -s * t1 + c * t2;
      }
    }
    if (std::abs(d[iq_]) <= 1e-12 * std::max(1.0, d.head(iq_ + 1).norm())) {
      return false;
    }
    R_.col(iq_).head(iq_ + 1) = d.head(iq_ + 1);
    ++iq_;
    return true;
  }

  // Remove the l-th active constraint and restore triangularity of R.
  void remove(Eigen::Index l) {
    for (Eigen::Index col = l; col + 1 < iq_; ++col) {
      R_.col(col) = R_.col(col + 1);
    }
    R_.col(iq_ - 1).setZero();
    --iq_;
    for (Eigen::Index j = l; j < iq_; ++j) {
      const double a = R_(j, j);
      const double b = R_(j + 1, j);
      const double h = std::hypot(a, b);
      if (h == 0.0) {
        continue;
      }
      const double c = a / h;
      const double s = b / h;
      for (Eigen::Index col = j; col < iq_; ++col) {
        const double t1 = R_(j, col);
        const double t2 = R_(j + 1, col);
        R_(j, col) = c * t1 + s * t2;
        R_(j + 1, col) = -s * t1 + c * t2;
      }
      R_(j + 1, j) = 0.0;
      for (Eigen::Index row = 0; row < k_; ++row) {
        const double t1 = J_(row, j);
        const double t2 = J_(row, j + 1);
        J_(row, j) = c * t1 + s * t2;
        J_(row, j + 1) = -s * t1 + c * t2;
      }
    }
  }

 private:
  Eigen::Index k_;
  Eigen::Index iq_ = 0;
  Eigen::MatrixXd J_;
  Eigen::MatrixXd R_;
};

void fill_multipliers(const QuadraticProgram& p, const ConstraintSet& set, const std::vector<int>& active,
                      const Eigen::VectorXd& u, Solution& sol) {
  const Eigen::Index k = p.c.size();
  sol.eq_multipliers = Eigen::VectorXd::Zero(p.A_eq.rows());
  sol.in_multipliers = Eigen::VectorXd::Zero(p.A_in.rows());
  sol.lower_multipliers = Eigen::VectorXd::Zero(k);
  sol.upper_multipliers = Eigen::VectorXd::Zero(k);
  for (size_t a = 0; a < active.size(); ++a) {
    const auto j = static_cast<size_t>(active[a]);
    const double value = u[static_cast<Eigen::Index>(a)];
    const Eigen::Index row = set.source_row[j];
    switch (set.origin[j]) {
      case Origin::equality: sol.eq_multipliers[row] = -value; break;
      case Origin::inequality: sol.in_multipliers[row] = value; break;
      case Origin::lower: sol.lower_multipliers[row] += value; break;
      case Origin::upper: sol.upper_multipliers[row] += value; break;
    }
  }
}

KktResiduals residuals(const QuadraticProgram& p, const Solution& s) {
  KktResiduals r;
  Eigen::VectorXd grad = p.Q * s.x + p.c - s.lower_multipliers + s.upper_multipliers;
  if (p.A_eq.rows() > 0) {
    grad += p.A_eq.transpose() * s.eq_multipliers;
    r.equality = (p.A_eq * s.x - p.b_eq).cwiseAbs().maxCoeff();
  }
  if (p.A_in.rows() > 0) {
    grad += p.A_in.transpose() * s.in_multipliers;
    r.inequality = std::max(0.0, (p.A_in * s.x - p.b_in).maxCoeff());
  }
  for (Eigen::Index i = 0; i < p.lower.size(); ++i) {
    r.inequality = std::max(r.inequality, p.lower[i] - s.x[i]);
  }
  for (Eigen::Index i = 0; i < p.upper.size(); ++i) {
    r.inequality = std::max(r.inequality, s.x[i] - p.upper[i]);
  }
  r.stationarity = grad.cwiseAbs().maxCoeff();
  return r;
}

}  // namespace

Solution solve(const QuadraticProgram& problem, double tol, int max_iter) {
  validate(problem);
  const Eigen::Index k = problem.c.size();
  const ConstraintSet set = gather(problem);
  const auto total = static_cast<int>(set.rhs.size());

  Eigen::LLT<Eigen::MatrixXd> llt(problem.Q);
  if (llt.info() != Eigen::Success) {
    throw std::invalid_argument("QP: Q is not positive definite");
  }
  ActiveSetFactor factor(llt.matrixL());

  Solution sol;
  sol.x = -llt.solve(problem.c);
  Eigen::VectorXd u = Eigen::VectorXd::Zero(k);
  std::vector<int> active;
  std::vector<bool> is_active(static_cast<size_t>(total), false);
  Eigen::VectorXd d, z, r;

  auto finish = [&](Status status) {
    sol.status = status;
    fill_multipliers(problem, set, active, u, sol);
    sol.objective = problem.objective(sol.x);
    sol.kkt_residuals = residuals(problem, sol);
    return sol;
  };

  // Equalities first; their multipliers are free and they are never dropped.
  for (int i = 0; i < set.num_eq; ++i) {
    const Eigen::VectorXd np = set.normals.col(i);
    factor.directions(np, d, z, r);
    const double residual = set.rhs[i] - np.dot(sol.x);
    if (d.tail(k - factor.size()).norm() <= 1e-10 * d.norm()) {
      // Dependent on constraints already active: consistent or infeasible.
      if (std::abs(residual) > tol * (1.0 + std::abs(set.rhs[i]))) {
        return finish(Status::infeasible);
      }
      continue;
    }
    const double step = residual / z.dot(np);
    sol.x += step * z;
    const Eigen::Index iq = factor.size();
    if (iq > 0) {
      u.head(iq) -= step * r;
    }
    u[iq] = step;
    if (!factor.add(d)) {
      return finish(Status::infeasible);
    }
    active.push_back(i);
    is_active[static_cast<size_t>(i)] = true;
  }
  const auto num_eq_active = static_cast<Eigen::Index>(active.size());

  while (true) {
    // Most violated inactive inequality.
    int p = -1;
    double worst = 0.0;
    for (int j = set.num_eq; j < total; ++j) {
      if (is_active[static_cast<size_t>(j)]) {
        continue;
      }
      const double s = set.normals.col(j).dot(sol.x) - set.rhs[j];
      const double threshold = 1e-3 * tol * (1.0 + std::abs(set.rhs[j]));
      if (s < -threshold && s < worst) {
        worst = s;
        p = j;
      }
    }
    if (p < 0) {
      return finish(Status::optimal);
    }

    const Eigen::VectorXd np = set.normals.col(p);
    double u_p = 0.0;
    while (true) {
      if (sol.iterations >= max_iter) {
        return finish(Status::max_iterations);
      }
      factor.directions(np, d, z, r);
      const Eigen::Index iq = factor.size();

      // Largest dual step keeping active inequality multipliers >= 0.
      double t1 = kInf;
      Eigen::Index drop = -1;
      for (Eigen::Index a = num_eq_active; a < iq; ++a) {
        if (r[a] > 0.0) {
          const double ratio = u[a] / r[a];
          if (ratio < t1) {
            t1 = ratio;
            drop = a;
          }
        }
      }
      // Full primal step making constraint p active.
      double t2 = kInf;
      const bool primal = d.tail(k - iq).norm() > 1e-10 * d.norm();
      if (primal) {
        t2 = (set.rhs[p] - np.dot(sol.x)) / z.dot(np);
      }
      const double t = std::min(t1, t2);
      if (!std::isfinite(t)) {
        return finish(Status::infeasible);
      }
      ++sol.iterations;

      if (primal) {
        sol.x += t * z;
      }
      if (iq > 0) {
        u.head(iq) -= t * r;
      }
      u_p += t;

      if (primal && t2 <= t1) {
        u[iq] = u_p;
        if (!factor.add(d)) {
          return finish(Status::infeasible);
        }
        active.push_back(p);
        is_active[static_cast<size_t>(p)] = true;
        break;
      }
      // Partial step: drop the blocking constraint and retry p.
      is_active[static_cast<size_t>(active[static_cast<size_t>(drop)])] = false;
      active.erase(active.begin() + drop);
      for (Eigen::Index a = drop; a + 1 < iq; ++a) {
        u[a] = u[a + 1];
      }
      u[iq - 1] = 0.0;
      factor.remove(drop);
    }
  }
}

}  // namespace mmc::qp
