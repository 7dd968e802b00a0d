#include "tdcr/mpc.hpp"

#include <chrono>
#include <cmath>
#include <limits>

#include "tdcr/qp.hpp"

namespace tdcr {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr int kReduced = 9;  // tendon-consistent inputs per step

using Basis = Eigen::Matrix<double, kActuators, kReduced>;
using RowVec12 = Eigen::Matrix<double, 1, kActuators>;

double hinge(double r) { return r < 0.0 ? -r : 0.0; }

// Gradient of kappa_max(gamma_j) - kappa_j with respect to the state.
RowVec12 curvature_gradient(const ActuatorState& s, const RobotGeometry& geom, int j) {
  RowVec12 grad = RowVec12::Zero();
  const double gamma = s.segment_length(j);
  double a = 0.0;
  double b = 0.0;
  for (int m = 0; m < kTendonsPerSegment; ++m) {
    a += (s.tendon(j, m) - gamma) * std::cos(geom.tendon_angles[m]);
    b += (s.tendon(j, m) - gamma) * std::sin(geom.tendon_angles[m]);
  }
  const double rho = std::hypot(a, b);
  const double scale = 2.0 / (3.0 * gamma * geom.tendon_radius);
  const double kappa = scale * rho;
  grad[length_index(j)] = -geom.max_bend_angle / (gamma * gamma) + kappa / gamma;
  if (rho > 0.0) {
    for (int m = 0; m < kTendonsPerSegment; ++m) {
      const double da = std::cos(geom.tendon_angles[m]);
      const double db = std::sin(geom.tendon_angles[m]);
      grad[tendon_index(j, m)] = -scale * (a * da + b * db) / rho;
      // a and b also depend on gamma through (q - gamma); the sums of the
      // direction cosines vanish for equally spaced tendons.
    }
  }
  return grad;
}

// Everything the SQP needs at one iterate.
struct Iterate {
  Eigen::VectorXd v;
  std::vector<ActuatorState> x;  // 0..N
  std::vector<ActuatorVector> u;  // 1..N stored at 0..N-1
  std::vector<RobotShape> shapes;  // for x[1..N], stored at 0..N-1
  std::vector<std::vector<SdfResult>> sdf;
  std::vector<Eigen::Vector3d> curvature;  // residuals per state
  double cost = kInf;
  double violation = kInf;  // sum of nonlinear hinge violations
  double max_violation = kInf;
  bool valid = false;
};

class Sqp {
 public:
  Sqp(const ActuatorState& x0, const Vec3& target, const SafeZone* zone, const MpcParams& params,
      const RobotGeometry& geom)
      : x0_(x0), target_(target), zone_(zone), p_(params), geom_(geom), T_(coupling_basis()),
        lb_(geom.lower_bounds()), ub_(geom.upper_bounds()), n_(params.horizon) {}

  int size() const { return kReduced * n_; }

  Iterate evaluate(const Eigen::VectorXd& v) const {
    Iterate it;
    it.v = v;
    it.x.push_back(x0_);
    it.cost = 0.0;
    for (int i = 0; i < n_; ++i) {
      const ActuatorVector u = T_ * v.segment<kReduced>(kReduced * i);
      it.u.push_back(u);
      it.x.emplace_back(it.x.back().x + p_.dt * u);
    }
    try {
      for (int i = 1; i <= n_; ++i) {
        const ActuatorState& xi = it.x[i];
        it.shapes.push_back(kinematics::forward_kinematics(xi, geom_));
        const Vec3 e = it.shapes.back().tip() - target_;
        it.cost += e.dot(p_.Q * e) + it.u[i - 1].dot(p_.R * it.u[i - 1]) + xi.x.dot(p_.S * xi.x);
      }
    } catch (const std::exception&) {
      it.cost = kInf;
      return it;
    }
    double viol = 0.0;
    double worst = 0.0;
    for (int i = 1; i <= n_; ++i) {
      const ActuatorState& xi = it.x[i];
      std::vector<SdfResult> q;
      if (zone_) {
        for (const Vec3& pt : it.shapes[i - 1].points) {
          q.push_back(zone_->query(pt));
          const double h = hinge(q.back().distance - p_.safe_margin);
          viol += h;
          worst = std::max(worst, h);
        }
      }
      it.sdf.push_back(std::move(q));
      Eigen::Vector3d c;
      for (int j = 0; j < kSegments; ++j) {
        c[j] = kinematics::max_curvature(xi.segment_length(j), geom_) -
               kinematics::segment_curvature(xi, geom_, j);
        viol += hinge(c[j]);
        worst = std::max(worst, hinge(c[j]));
      }
      it.curvature.push_back(c);
      for (int k = 0; k < kActuators; ++k) {
        const double h = std::max(hinge(xi.x[k] - lb_[k]), hinge(ub_[k] - xi.x[k]));
        viol += h;
        worst = std::max(worst, h);
        const double hu = std::max(hinge(it.u[i - 1][k] - p_.u_min[k]), hinge(p_.u_max[k] - it.u[i - 1][k]));
        viol += hu;
        worst = std::max(worst, hu);
      }
    }
    it.violation = viol;
    it.max_violation = worst;
    it.valid = true;
    return it;
  }

  // Builds the QP in the step delta. `relax` keeps currently violated
  // nonlinear rows from having to be repaired in one step.
  qp::Problem subproblem(const Iterate& it, bool relax, Eigen::VectorXd& grad) const {
    const int nv = size();
    qp::Problem qp;
    qp.H = Eigen::MatrixXd::Zero(nv, nv);
    grad = Eigen::VectorXd::Zero(nv);
    qp.E.resize(0, nv);
    qp.e.resize(0);

    const int disks = zone_ ? geom_.disk_count() : 0;
    const int rows_per_step = disks + kSegments + 4 * kActuators;
    qp.A = Eigen::MatrixXd::Zero(rows_per_step * n_, nv);
    qp.b = Eigen::VectorXd::Zero(rows_per_step * n_);

    const Eigen::Matrix<double, kReduced, kReduced> TRT = 2.0 * T_.transpose() * p_.R * T_;
    int row = 0;
    for (int i = 1; i <= n_; ++i) {
      // dx_i/dv = dt [T ... T 0 ... 0] with i copies of T.
      Eigen::MatrixXd X = Eigen::MatrixXd::Zero(kActuators, nv);
      for (int l = 0; l < i; ++l) X.middleCols(kReduced * l, kReduced) = p_.dt * T_;

      const ActuatorState& xi = it.x[i];
      const std::vector<Jacobian> jac = kinematics::disk_jacobians(xi, geom_);
      const Eigen::MatrixXd G = jac.back() * X;
      const Vec3 e = it.shapes[i - 1].tip() - target_;
      qp.H += 2.0 * G.transpose() * p_.Q * G + 2.0 * X.transpose() * p_.S * X;
      grad += 2.0 * G.transpose() * (p_.Q * e) + 2.0 * X.transpose() * (p_.S * xi.x);
      const int blk = kReduced * (i - 1);
      qp.H.block(blk, blk, kReduced, kReduced) += TRT;
      grad.segment<kReduced>(blk) += 2.0 * T_.transpose() * (p_.R * it.u[i - 1]);

      for (int k = 0; k < disks; ++k) {
        const SdfResult& s = it.sdf[i - 1][k];
        const double r = s.distance - p_.safe_margin;
        qp.A.row(row) = s.gradient.transpose() * jac[k] * X;
        qp.b[row] = relax ? std::min(-r, 0.0) : -r;
        ++row;
      }
      for (int j = 0; j < kSegments; ++j) {
        const double r = it.curvature[i - 1][j];
        qp.A.row(row) = curvature_gradient(xi, geom_, j) * X;
        qp.b[row] = relax ? std::min(-r, 0.0) : -r;
        ++row;
      }
      qp.A.middleRows(row, kActuators) = X;
      qp.b.segment<kActuators>(row) = lb_ - xi.x;
      row += kActuators;
      qp.A.middleRows(row, kActuators) = -X;
      qp.b.segment<kActuators>(row) = xi.x - ub_;
      row += kActuators;
      qp.A.block(row, blk, kActuators, kReduced) = T_;
      qp.b.segment<kActuators>(row) = p_.u_min - it.u[i - 1];
      row += kActuators;
      qp.A.block(row, blk, kActuators, kReduced) = -T_;
      qp.b.segment<kActuators>(row) = it.u[i - 1] - p_.u_max;
      row += kActuators;
    }
    // Tiny Levenberg term keeps H definite if R is configured as zero.
    qp.H.diagonal().array() += 1e-9 * std::max(1.0, qp.H.diagonal().mean());
    qp.g = grad;
    return qp;
  }

  MpcSolution run(const MpcSolution* warm_start) const {
    const auto t0 = std::chrono::steady_clock::now();
    MpcSolution sol;

    const ConstraintResiduals start =
        evaluate_constraints(x0_, ActuatorVector::Zero(), zone_, p_, geom_);
    if (!start.feasible(p_.tol_c)) {
      sol.status = SolverStatus::kInfeasible;
      sol.states.assign(n_ + 1, x0_);
      sol.inputs.assign(n_, ActuatorVector::Zero());
      try {
        sol.outputs.assign(n_ + 1, kinematics::forward_kinematics(x0_, geom_));
      } catch (const std::exception&) {
        sol.outputs.assign(n_ + 1, RobotShape{});
      }
      sol.min_margin = zone_ ? start.collision.minCoeff() : kInf;
      sol.solve_time_ms = elapsed_ms(t0);
      return sol;
    }

    // The zero input keeps every state at x0 and is therefore feasible.
    Iterate cur = evaluate(Eigen::VectorXd::Zero(size()));
    if (warm_start && static_cast<int>(warm_start->inputs.size()) >= 1) {
      Eigen::VectorXd v(size());
      const int m = static_cast<int>(warm_start->inputs.size());
      for (int i = 0; i < n_; ++i) {
        const ActuatorVector& u = warm_start->inputs[std::min(i + 1, m - 1)];
        v.segment<kReduced>(kReduced * i) = reduce(u);
      }
      Iterate warm = evaluate(v);
      if (warm.valid && warm.max_violation <= p_.tol_c && warm.cost < cur.cost) cur = std::move(warm);
    }
    Iterate best = cur;

    double rho = 10.0;
    int active = 0;
    bool converged = false;
    int iter = 0;
    for (; iter < p_.max_iterations; ++iter) {
      Eigen::VectorXd grad;
      qp::Problem qp = subproblem(cur, false, grad);
      qp::Result res = qp::solve(qp);
      if (res.status != qp::Status::kOptimal) {
        qp = subproblem(cur, true, grad);
        res = qp::solve(qp);
        if (res.status != qp::Status::kOptimal) break;
      }
      active = static_cast<int>(res.active.size());
      const Eigen::VectorXd& delta = res.x;
      const double predicted = -(grad.dot(delta) + 0.5 * delta.dot(qp.H * delta));
      if (cur.max_violation <= p_.tol_c &&
          (predicted <= p_.tol_g * std::max(1.0, std::abs(cur.cost)) ||
           delta.lpNorm<Eigen::Infinity>() <= 1e-12)) {
        converged = true;
        break;
      }

      if (res.lambda.size() > 0) rho = std::max(rho, 2.0 * res.lambda.maxCoeff());
      const double merit = cur.cost + rho * cur.violation;
      const double slope = grad.dot(delta) - rho * cur.violation;
      double alpha = 1.0;
      bool accepted = false;
      for (int ls = 0; ls < 30; ++ls, alpha *= 0.5) {
        Iterate trial = evaluate(cur.v + alpha * delta);
        if (!trial.valid) continue;
        if (trial.cost + rho * trial.violation <= merit + 1e-4 * alpha * std::min(slope, 0.0)) {
          cur = std::move(trial);
          accepted = true;
          break;
        }
      }
      if (!accepted) break;
      if (cur.max_violation <= p_.tol_c && cur.cost < best.cost) best = cur;
    }
    if (cur.max_violation <= p_.tol_c && cur.cost <= best.cost) best = cur;

    sol.status = converged && best.v == cur.v ? SolverStatus::kOptimal : SolverStatus::kMaxIterations;
    sol.iterations = iter;
    sol.active_constraints = active;
    sol.cost = best.cost;
    sol.states = best.x;
    sol.inputs = best.u;
    sol.outputs.reserve(n_ + 1);
    sol.outputs.push_back(kinematics::forward_kinematics(x0_, geom_));
    for (const RobotShape& s : best.shapes) sol.outputs.push_back(s);
    sol.min_margin = kInf;
    for (const auto& step : best.sdf)
      for (const SdfResult& s : step) sol.min_margin = std::min(sol.min_margin, s.distance - p_.safe_margin);
    sol.solve_time_ms = elapsed_ms(t0);
    return sol;
  }

 private:
  static double elapsed_ms(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  }

  // Coordinates of a tendon-consistent input in the basis T (T'T is diagonal).
  Eigen::Matrix<double, kReduced, 1> reduce(const ActuatorVector& u) const {
    Eigen::Matrix<double, kReduced, 1> v = T_.transpose() * u;
    for (int j = 0; j < kSegments; ++j) v[3 * j] /= 4.0;
    return v;
  }

  const ActuatorState& x0_;
  const Vec3& target_;
  const SafeZone* zone_;
  const MpcParams& p_;
  const RobotGeometry& geom_;
  Basis T_;
  ActuatorVector lb_;
  ActuatorVector ub_;
  int n_;
};

}  // namespace

void MpcParams::validate() const {
  if (horizon < 1) throw InvalidInput("horizon must be >= 1");
  if (!(dt > 0.0)) throw InvalidInput("dt must be positive");
  if (!(safe_margin > 0.0)) throw InvalidInput("safe margin c_d must be positive");
  auto psd = [](const Eigen::MatrixXd& M) {
    if (!M.isApprox(M.transpose(), 1e-12)) return false;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M);
    return es.eigenvalues().minCoeff() >= -1e-12 * std::max(1.0, M.norm());
  };
  if (!psd(Q) || !psd(R) || !psd(S)) throw InvalidInput("Q, R and S must be symmetric positive semidefinite");
  if ((u_min.array() > 0.0).any() || (u_max.array() < 0.0).any())
    throw InvalidInput("input box must contain zero");
  if (!(tol_c > 0.0) || !(tol_g > 0.0) || max_iterations < 1)
    throw InvalidInput("solver tolerances must be positive");
}

const char* to_string(SolverStatus status) {
  switch (status) {
    case SolverStatus::kOptimal: return "optimal";
    case SolverStatus::kMaxIterations: return "max_iter";
    case SolverStatus::kInfeasible: return "infeasible";
  }
  return "unknown";
}

double ConstraintResiduals::max_violation() const {
  double worst = 0.0;
  auto ineq = [&](const auto& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) worst = std::max(worst, hinge(v[i]));
  };
  ineq(collision);
  ineq(curvature);
  ineq(state_lower);
  ineq(state_upper);
  ineq(input_lower);
  ineq(input_upper);
  worst = std::max(worst, coupling.cwiseAbs().maxCoeff());
  return worst;
}

double stage_cost(const ActuatorState& x, const ActuatorVector& u, const Vec3& target,
                  const MpcParams& params, const RobotGeometry& geom) {
  const Vec3 e = kinematics::tip_position(x, geom) - target;
  return e.dot(params.Q * e) + u.dot(params.R * u) + x.x.dot(params.S * x.x);
}

ConstraintResiduals evaluate_constraints(const ActuatorState& x, const ActuatorVector& u,
                                         const SafeZone* zone, const MpcParams& params,
                                         const RobotGeometry& geom) {
  ConstraintResiduals r;
  if (zone) {
    const RobotShape shape = kinematics::forward_kinematics(x, geom);
    r.collision.resize(static_cast<Eigen::Index>(shape.size()));
    for (std::size_t i = 0; i < shape.size(); ++i)
      r.collision[static_cast<Eigen::Index>(i)] = zone->signed_distance(shape.points[i]) - params.safe_margin;
  }
  for (int j = 0; j < kSegments; ++j) {
    r.coupling[j] = x.coupling_residual(j);
    r.curvature[j] = kinematics::max_curvature(x.segment_length(j), geom) -
                     kinematics::segment_curvature(x, geom, j);
  }
  r.state_lower = x.x - geom.lower_bounds();
  r.state_upper = geom.upper_bounds() - x.x;
  r.input_lower = u - params.u_min;
  r.input_upper = params.u_max - u;
  return r;
}

ActuatorState initialize(const MpcSolution* previous, const RobotGeometry& geom) {
  if (!previous || previous->states.size() < 2) return centered_straight_state(geom);
  return previous->states[1];
}

Eigen::Matrix<double, kActuators, 9> coupling_basis() {
  Basis T = Basis::Zero();
  const double s6 = 1.0 / std::sqrt(6.0);
  const double s2 = 1.0 / std::sqrt(2.0);
  const double b1[3] = {2.0 * s6, -s6, -s6};
  const double b2[3] = {0.0, s2, -s2};
  for (int j = 0; j < kSegments; ++j) {
    for (int m = 0; m < kTendonsPerSegment; ++m) {
      T(tendon_index(j, m), 3 * j) = 1.0;
      T(tendon_index(j, m), 3 * j + 1) = b1[m];
      T(tendon_index(j, m), 3 * j + 2) = b2[m];
    }
    T(length_index(j), 3 * j) = 1.0;
  }
  return T;
}

MpcSolution solve_mpc(const ActuatorState& x0, const Vec3& target, const SafeZone* zone,
                      const MpcParams& params, const RobotGeometry& geom,
                      const MpcSolution* warm_start) {
  return Sqp(x0, target, zone, params, geom).run(warm_start);
}

MpcController::MpcController(MpcParams params, RobotGeometry geom, const SafeZone* zone)
    : params_(std::move(params)), geom_(std::move(geom)), zone_(zone) {
  params_.validate();
  geom_.validate();
}

ActuatorState MpcController::nominal_start() const {
  if (last_) return initialize(&*last_, geom_);
  return start_ ? *start_ : initialize(nullptr, geom_);
}

const MpcSolution& MpcController::step(const Vec3& target) {
  const ActuatorState x0 = nominal_start();
  MpcSolution sol = solve_mpc(x0, target, zone_, params_, geom_, last_ ? &*last_ : nullptr);
  last_ = std::move(sol);
  return *last_;
}

void MpcController::reset(std::optional<ActuatorState> start) {
  start_ = std::move(start);
  last_.reset();
}

}  // namespace tdcr
