#pragma once

#include <optional>
#include <vector>

#include <Eigen/Core>

#include "tdcr/kinematics.hpp"
#include "tdcr/mesh.hpp"
#include "tdcr/types.hpp"

namespace tdcr {

inline ActuatorVector default_input_limit() {
  ActuatorVector v = ActuatorVector::Constant(4.5);
  for (int s = 0; s < kSegments; ++s) v[length_index(s)] = 0.9;
  return v;
}

struct MpcParams {
  int horizon = 2;
  double dt = 1.0 / 30.0;  // s
  Eigen::Matrix3d Q = 1000.0 * Eigen::Matrix3d::Identity();
  ActuatorMatrix R = 10.0 * ActuatorMatrix::Identity();
  ActuatorMatrix S = 10.0 * ActuatorMatrix::Identity();
  double safe_margin = 5.5;  // c_d, mm
  // mm/s; the hardware speeds of the original prototype (tendons 4.5, backbone 0.9).
  ActuatorVector u_max = default_input_limit();
  ActuatorVector u_min = -default_input_limit();
  double tol_c = 1e-6;
  double tol_g = 1e-8;
  int max_iterations = 50;

  /// Throws InvalidInput.
  void validate() const;
};

enum class SolverStatus { kOptimal, kMaxIterations, kInfeasible };

const char* to_string(SolverStatus status);

/// Predicted trajectory at one control tick. Index i of `states` and
/// `outputs` is x̂[i|k], i = 0..N; inputs[i] is û[i+1|k], i = 0..N-1.
struct MpcSolution {
  std::vector<ActuatorState> states;
  std::vector<ActuatorVector> inputs;
  std::vector<RobotShape> outputs;
  double cost = 0.0;
  SolverStatus status = SolverStatus::kInfeasible;
  int iterations = 0;
  int active_constraints = 0;
  /// min over predicted states i >= 1 and disks of d(p̂_i) - c_d; +inf without a zone.
  double min_margin = 0.0;
  double solve_time_ms = 0.0;

  const ActuatorVector& first_input() const { return inputs.front(); }
};

/// Residuals of every constraint at one (state, input) pair. Inequalities are
/// satisfied when nonnegative, equalities when their magnitude is within tol_c.
struct ConstraintResiduals {
  Eigen::VectorXd collision;  // d(p_i) - c_d, i = 1..3n; empty without a zone
  Eigen::Vector3d coupling;   // 3 gamma_j - sum_m q_jm
  Eigen::Vector3d curvature;  // kappa_max(gamma_j) - kappa_j
  ActuatorVector state_lower;  // x - x_min
  ActuatorVector state_upper;  // x_max - x
  ActuatorVector input_lower;  // u - u_min
  ActuatorVector input_upper;  // u_max - u

  /// Largest violation over all entries (0 when feasible).
  double max_violation() const;
  bool feasible(double tol) const { return max_violation() <= tol; }
};

/// e'Qe + u'Ru + x'Sx with e the nominal tip error.
double stage_cost(const ActuatorState& x, const ActuatorVector& u, const Vec3& target,
                  const MpcParams& params, const RobotGeometry& geom);

/// `zone` may be null, which disables the collision rows.
ConstraintResiduals evaluate_constraints(const ActuatorState& x, const ActuatorVector& u,
                                         const SafeZone* zone, const MpcParams& params,
                                         const RobotGeometry& geom);

/// Nominal start state: straight and centered on the first call, otherwise
/// the previous prediction advanced by its first input.
ActuatorState initialize(const MpcSolution* previous, const RobotGeometry& geom);

/// Orthonormal-free basis of tendon-consistent inputs: u = T v with, per
/// segment, v = (gamma rate, two differential tendon rates).
Eigen::Matrix<double, kActuators, 9> coupling_basis();

/// SQP over single-shooting inputs. Returns status kInfeasible with zero
/// inputs if x0 violates a state constraint.
MpcSolution solve_mpc(const ActuatorState& x0, const Vec3& target, const SafeZone* zone,
                      const MpcParams& params, const RobotGeometry& geom,
                      const MpcSolution* warm_start = nullptr);

/// Keeps the nominal state between ticks.
class MpcController {
 public:
  MpcController(MpcParams params, RobotGeometry geom, const SafeZone* zone = nullptr);

  /// Solves from the current nominal start state and remembers the result.
  const MpcSolution& step(const Vec3& target);

  /// x̂_0 for the next call to step().
  ActuatorState nominal_start() const;
  const std::optional<MpcSolution>& last() const { return last_; }
  const MpcParams& params() const { return params_; }
  void reset(std::optional<ActuatorState> start = std::nullopt);

 private:
  MpcParams params_;
  RobotGeometry geom_;
  const SafeZone* zone_;
  std::optional<ActuatorState> start_;
  std::optional<MpcSolution> last_;
};

}  // namespace tdcr
