#pragma once

#include <vector>

#include <Eigen/Core>

#include "tdcr/kinematics.hpp"
#include "tdcr/types.hpp"

namespace tdcr {

using PseudoInverse = Eigen::Matrix<double, kActuators, 3>;

struct LocalGains {
  double k_ee = 2.0;
  double k_body = 0.5;
  double damping = 1e-2;  // lambda
  /// Restrict the correction to tendon-consistent inputs by applying the law
  /// in an orthonormal basis of the coupling subspace.
  bool coupled = true;

  void validate() const;
};

/// (J'J + lambda I)^-1 J' for any number of columns.
Eigen::MatrixXd damped_pseudoinverse(const Eigen::MatrixXd& J, double lambda);
PseudoInverse damped_pseudoinverse(const Jacobian& J, double lambda);

/// Mean squared deviation over disks 1..3n-1 (the tip is excluded).
double body_error(const RobotShape& nominal, const RobotShape& measured);

/// d(body_error)/dx with the measured shape held fixed, given the disk
/// Jacobians of the nominal shape.
ActuatorVector body_error_gradient(const RobotShape& nominal, const RobotShape& measured,
                                   const std::vector<Jacobian>& jacobians);

/// Per-term breakdown of one local control evaluation.
struct LocalControlTerms {
  ActuatorVector ee = ActuatorVector::Zero();
  ActuatorVector body = ActuatorVector::Zero();
  ActuatorVector total() const { return ee + body; }
};

/// k_EE J+ (p̂_tip - p_tip) + k_body (I - J+ J) dΔ_body/dx, Jacobians at `state`.
/// A measured shape holding only the tip selects EE-only feedback.
LocalControlTerms local_control_terms(const RobotShape& nominal, const RobotShape& measured,
                                      const ActuatorState& state, const LocalGains& gains,
                                      const RobotGeometry& geom);

ActuatorVector local_control(const RobotShape& nominal, const RobotShape& measured,
                             const ActuatorState& state, const LocalGains& gains,
                             const RobotGeometry& geom);

/// Orthonormal basis (12 x 9) of inputs with 3 dgamma_j = sum_m dq_jm.
Eigen::Matrix<double, kActuators, 9> coupling_orthobasis();

}  // namespace tdcr
