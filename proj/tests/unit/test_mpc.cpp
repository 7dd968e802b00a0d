#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "tdcr/mpc.hpp"

using namespace tdcr;
namespace kin = tdcr::kinematics;

namespace {

MpcParams no_shrink_params() {
  MpcParams p;
  p.S.setZero();
  return p;
}

// e'Qe + u'Ru + x'Sx written out without any library helper.
double cost_by_hand(const ActuatorVector& x, const ActuatorVector& u, const Vec3& target, const MpcParams& p,
                    const RobotGeometry& geom) {
  const Vec3 e = kin::forward_kinematics(ActuatorState(x), geom).points.back() - target;
  double c = 0.0;
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) c += e[a] * p.Q(a, b) * e[b];
  for (int a = 0; a < kActuators; ++a)
    for (int b = 0; b < kActuators; ++b) c += u[a] * p.R(a, b) * u[b] + x[a] * p.S(a, b) * x[b];
  return c;
}

}  // namespace

TEST_CASE("stage cost examples") {
  const RobotGeometry geom;
  const ActuatorState straight = centered_straight_state(geom);
  const Vec3 ee = kin::tip_position(straight, geom);
  const MpcParams p = no_shrink_params();
  CHECK(stage_cost(straight, ActuatorVector::Zero(), ee, p, geom) == 0.0);
  ActuatorVector u = ActuatorVector::Zero();
  u[0] = 1.0;
  CHECK(stage_cost(straight, u, ee, p, geom) == doctest::Approx(10.0).epsilon(1e-14));

  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 3.0);
  MpcParams full;
  for (int trial = 0; trial < 50; ++trial) {
    const ActuatorState x = oracle::random_consistent_state(geom, rng);
    ActuatorVector ur;
    for (auto& v : ur) v = n(rng);
    const Vec3 target(n(rng) * 20, n(rng) * 20, 150 + n(rng) * 20);
    const double ref = cost_by_hand(x.x, ur, target, full, geom);
    CHECK(std::abs(stage_cost(x, ur, target, full, geom) - ref) <= 1e-12 * ref);
  }
}

TEST_CASE("constraint residual examples") {
  const RobotGeometry geom;
  const MpcParams p;
  const ActuatorState straight = centered_straight_state(geom);

  SUBCASE("straight robot inside a large box") {
    const SafeZone big(mesh_primitives::box(Vec3(-200, -200, -50), Vec3(200, 200, 400)));
    const ConstraintResiduals r = evaluate_constraints(straight, ActuatorVector::Zero(), &big, p, geom);
    CHECK(r.collision.size() == 30);
    CHECK(r.collision.minCoeff() > 0.0);
    CHECK(r.coupling.cwiseAbs().maxCoeff() == 0.0);
    CHECK(r.curvature.minCoeff() > 0.0);
    CHECK(r.state_lower.minCoeff() > 0.0);
    CHECK(r.state_upper.minCoeff() > 0.0);
    CHECK(r.input_lower.minCoeff() > 0.0);
    CHECK(r.input_upper.minCoeff() > 0.0);
    CHECK(r.feasible(p.tol_c));
  }
  SUBCASE("tip outside a shrunken box") {
    const TriangleMesh mesh = mesh_primitives::box(Vec3(-50, -50, -10), Vec3(50, 50, 200));
    const SafeZone zone(mesh);
    const ConstraintResiduals r = evaluate_constraints(straight, ActuatorVector::Zero(), &zone, p, geom);
    const Vec3 tip = kin::tip_position(straight, geom);
    CHECK(r.collision[29] < 0.0);
    CHECK(r.collision[29] == doctest::Approx(oracle::signed_distance(mesh, tip) - p.safe_margin));
    CHECK_FALSE(r.feasible(p.tol_c));
  }
  SUBCASE("single tendon offset breaks the coupling by exactly -3") {
    ActuatorState x = straight;
    x.x[tendon_index(0, 0)] += 3.0;
    const ConstraintResiduals r = evaluate_constraints(x, ActuatorVector::Zero(), nullptr, p, geom);
    CHECK(r.coupling[0] == -3.0);
    CHECK(r.coupling[1] == 0.0);
    CHECK(r.collision.size() == 0);
  }
  SUBCASE("input box") {
    ActuatorVector u = ActuatorVector::Zero();
    u[3] = p.u_max[3] + 0.5;
    const ConstraintResiduals r = evaluate_constraints(straight, u, nullptr, p, geom);
    CHECK(r.input_upper[3] == doctest::Approx(-0.5));
    CHECK(r.max_violation() == doctest::Approx(0.5));
  }
}

TEST_CASE("initialize") {
  const RobotGeometry geom;
  const ActuatorState first = initialize(nullptr, geom);
  for (int k = 0; k < kActuators; ++k) CHECK(first.x[k] == 70.0);

  const MpcParams p = no_shrink_params();
  MpcController mpc(p, geom);
  const Vec3 ee = kin::tip_position(first, geom);
  const MpcSolution& still = mpc.step(ee);
  CHECK(still.first_input().norm() < 1e-6);
  CHECK((initialize(&still, geom).x - first.x).norm() < 1e-6 / 30.0);

  for (int k = 0; k < 5; ++k) {
    const MpcSolution& sol = mpc.step(ee + Vec3(30, 0, -10));
    const ActuatorState next = initialize(&sol, geom);
    CHECK(next.x == sol.states[1].x);
    CHECK(next.x == (sol.states[0].x + p.dt * sol.inputs[0]));
    CHECK(mpc.nominal_start().x == next.x);
  }
}

TEST_CASE("stationary point at the current tip") {
  const RobotGeometry geom;
  std::mt19937_64 rng(8);
  const MpcParams p = no_shrink_params();
  for (int trial = 0; trial < 10; ++trial) {
    const ActuatorState x0 = oracle::random_consistent_state(geom, rng, 0.5);
    const MpcSolution sol = solve_mpc(x0, kin::tip_position(x0, geom), nullptr, p, geom);
    CHECK(sol.status == SolverStatus::kOptimal);
    for (const ActuatorVector& u : sol.inputs) CHECK(u.norm() < 1e-5);
  }
}

TEST_CASE("single-segment toy problem matches a dense grid search") {
  // Segments 2 and 3 frozen by a zero input box; N = 1.
  const RobotGeometry geom;
  MpcParams p = no_shrink_params();
  p.horizon = 1;
  p.tol_g = 1e-14;
  for (int s = 1; s < kSegments; ++s)
    for (int k = 0; k < 4; ++k) p.u_min[4 * s + k] = p.u_max[4 * s + k] = 0.0;

  // Tendon-consistent rates of segment 1 spanned by (gamma rate, two differentials).
  Eigen::Matrix<double, 4, 3> T;
  T << 1, 2 / std::sqrt(6.0), 0, 1, -1 / std::sqrt(6.0), 1 / std::sqrt(2.0), 1, -1 / std::sqrt(6.0),
      -1 / std::sqrt(2.0), 1, 0, 0;

  const ActuatorState x0 = centered_straight_state(geom);
  const Vec3 ee = kin::tip_position(x0, geom);
  for (const Vec3& offset : {Vec3(0.4, 0.2, -0.1), Vec3(30.0, -10.0, 0.0)}) {
    CAPTURE(offset.transpose());
    const Vec3 target = ee + offset;
    auto objective = [&](const Eigen::Vector3d& v, ActuatorVector& u) {
      u.setZero();
      u.head<4>() = T * v;
      for (int k = 0; k < 4; ++k)
        if (u[k] < p.u_min[k] - 1e-12 || u[k] > p.u_max[k] + 1e-12) return std::numeric_limits<double>::infinity();
      return cost_by_hand(x0.x + p.dt * u, u, target, p, geom);
    };

    // Coarse-to-fine grid over the three free coordinates.
    Eigen::Vector3d center = Eigen::Vector3d::Zero();
    double half = 8.0;
    double best = std::numeric_limits<double>::infinity();
    ActuatorVector best_u;
    for (int level = 0; level < 7; ++level) {
      const int n = 20;
      Eigen::Vector3d next = center;
      for (int a = -n; a <= n; ++a)
        for (int b = -n; b <= n; ++b)
          for (int c = -n; c <= n; ++c) {
            const Eigen::Vector3d v = center + half / n * Eigen::Vector3d(a, b, c);
            ActuatorVector u;
            const double f = objective(v, u);
            if (f < best) {
              best = f;
              best_u = u;
              next = v;
            }
          }
      center = next;
      half *= 0.25;
    }

    const MpcSolution sol = solve_mpc(x0, target, nullptr, p, geom);
    CHECK(sol.status == SolverStatus::kOptimal);
    CHECK((sol.first_input() - best_u).lpNorm<Eigen::Infinity>() < 1e-3);
    CHECK(sol.cost <= best + 1e-6 * std::max(1.0, best));
  }
}

TEST_CASE("infeasible start state is reported, not solved") {
  const RobotGeometry geom;
  ActuatorState x0 = centered_straight_state(geom);
  x0.x[length_index(1)] = geom.segment_length_max + 1.0;
  const MpcSolution sol = solve_mpc(x0, Vec3(0, 0, 200), nullptr, MpcParams{}, geom);
  CHECK(sol.status == SolverStatus::kInfeasible);
  for (const ActuatorVector& u : sol.inputs) CHECK(u.isZero(0.0));
}

TEST_CASE("40 mm step without disturbances: saturated, linear, then monotone") {
  const RobotGeometry geom;
  const MpcParams p;
  MpcController mpc(p, geom);
  const Vec3 target = kin::tip_position(initialize(nullptr, geom), geom) + Vec3(40, 0, -5);
  std::vector<double> err, decrement, stage;
  for (int k = 0; k < 150; ++k) {
    const MpcSolution& sol = mpc.step(target);
    REQUIRE(sol.status != SolverStatus::kInfeasible);
    const double e = (sol.outputs[0].tip() - target).norm();
    if (!err.empty()) decrement.push_back(err.back() - e);
    err.push_back(e);
    stage.push_back(stage_cost(sol.states[0], ActuatorVector::Zero(), target, p, geom));
    const double uinf = (sol.first_input().cwiseQuotient(p.u_max)).lpNorm<Eigen::Infinity>();
    CHECK(uinf <= 1.0 + 1e-9);
    if (k < 4) CHECK(uinf == doctest::Approx(1.0));
    for (const ActuatorState& s : sol.states)
      for (int j = 0; j < kSegments; ++j) CHECK(std::abs(s.coupling_residual(j)) <= p.tol_c);
  }
  // Saturated phase: equal decrements within 15 %.
  for (int k = 1; k < 4; ++k) CHECK(decrement[k] == doctest::Approx(decrement[0]).epsilon(0.15));
  // After the first second the closed-loop stage cost never increases.
  for (std::size_t k = 31; k < stage.size(); ++k) CHECK(stage[k] <= stage[k - 1] + 1e-9);
}

TEST_CASE("nominal shape never violates the safe zone in the winding tube") {
  const RobotGeometry geom;
  const SafeZone zone(mesh_primitives::winding_tube());
  MpcParams p;
  p.u_max.setConstant(4.5);
  p.u_min = -p.u_max;
  MpcController mpc(p, geom, &zone);
  ArcParameters arcs{};
  for (auto& a : arcs) a.length = 40.0;
  mpc.reset(kin::arcs_to_actuators(arcs, geom));
  // A target beyond the first bend drags the body toward the wall.
  for (int k = 0; k < 200; ++k) {
    const MpcSolution& sol = mpc.step(Vec3(60, 0, 160));
    REQUIRE(sol.status != SolverStatus::kInfeasible);
    for (std::size_t i = 0; i < sol.outputs.size(); ++i)
      for (const Vec3& pt : sol.outputs[i].points) CHECK(zone.signed_distance(pt) - p.safe_margin >= -p.tol_c);
    const ConstraintResiduals r = evaluate_constraints(sol.states[1], sol.inputs[0], &zone, p, geom);
    CHECK(r.feasible(p.tol_c));
  }
}
