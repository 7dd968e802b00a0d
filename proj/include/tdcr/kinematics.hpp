#pragma once

#include <vector>

#include "tdcr/types.hpp"

namespace tdcr {

/// Piecewise-constant-curvature kinematics.
///
/// Each segment j bends as a circular arc of length gamma_j with curvature
/// kappa_j in the plane at angle phi_j about the local z-axis. A tendon at
/// angle beta_m on pitch radius r_t has length
///
///   q_jm = gamma_j * (1 - r_t * kappa_j * cos(beta_m - phi_j)),
///
/// which is inverted in closed form for three equally spaced tendons. The
/// common mode of the tendon lengths (the violation of 3*gamma_j = sum_m q_jm)
/// does not enter the inversion, so inconsistent states are silently mapped
/// through their tendon-consistent projection.
namespace kinematics {

/// Below this curvature the arc position uses a series expansion.
inline constexpr double kStraightThreshold = 1e-8;
/// Central finite-difference step for Jacobians, in mm.
inline constexpr double kJacobianStep = 1e-4;

ArcParameters actuators_to_arcs(const ActuatorState& state, const RobotGeometry& geom);

/// Tendon lengths reproducing the given arcs; the inverse of actuators_to_arcs on
/// the tendon-consistent subspace.
ActuatorState arcs_to_actuators(const ArcParameters& arcs, const RobotGeometry& geom);

RobotShape arcs_to_shape(const ArcParameters& arcs, const RobotGeometry& geom);

RobotShape forward_kinematics(const ActuatorState& state, const RobotGeometry& geom);

/// Tip position only; cheaper than the full shape when only the EE is needed.
Vec3 tip_position(const ActuatorState& state, const RobotGeometry& geom);

double segment_curvature(const ActuatorState& state, const RobotGeometry& geom, int segment);

/// Maximum admissible curvature of a segment of the given length (constant bend angle).
double max_curvature(double segment_length, const RobotGeometry& geom);

/// Jacobians J_i = dp_i/dx for every disk (index 0 is disk 1, back() the tip).
/// Central differences; one-sided at box limits.
std::vector<Jacobian> disk_jacobians(const ActuatorState& state, const RobotGeometry& geom,
                                     double step = kJacobianStep);

/// Jacobian of disk i, 1-based as in p_1 .. p_{3n}.
Jacobian disk_jacobian(const ActuatorState& state, const RobotGeometry& geom, int disk,
                       double step = kJacobianStep);

}  // namespace kinematics
}  // namespace tdcr
