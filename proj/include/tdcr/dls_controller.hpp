#pragma once

#include "tdcr/kinematics.hpp"
#include "tdcr/mesh.hpp"
#include "tdcr/types.hpp"

namespace tdcr {

struct DlsParams {
  double c_w = 1.0;  // W = c_w I
  double k_j = 0.05;
  double safe_margin = 5.5;  // c_d, mm

  void validate() const;
};

/// Sum over disks 1..3n-1 of ReLU(c_d - d(p_i))^2.
double collision_cost(const RobotShape& shape, const SafeZone& zone, double safe_margin);

/// dh/dx = sum_i 2 ReLU(c_d - d_i) (-grad d_i)' J_i. Zero at d_i = c_d.
ActuatorVector collision_cost_gradient(const RobotShape& shape, const std::vector<Jacobian>& jacobians,
                                       const SafeZone& zone, double safe_margin);

/// The damped least-squares law as a state increment:
///   k_j (J'J + W)^-1 (J'(p_d - p_tip) - W dh/dx).
/// `zone` may be null (h = 0). Jacobians are taken at `state`.
ActuatorVector dls_law(const RobotShape& measured, const ActuatorState& state, const Vec3& target,
                       const SafeZone* zone, const DlsParams& params, const RobotGeometry& geom);

struct DlsCommand {
  ActuatorVector rate = ActuatorVector::Zero();  // applied input, mm/s
  ActuatorVector raw = ActuatorVector::Zero();   // law / dt before projection and scaling
  double coupling_correction = 0.0;  // norm removed by the coupling projection
  double scale = 1.0;                // factor applied to fit the input box (1 = no clamp)
  bool clamped() const { return scale < 1.0; }
};

/// dls_law converted to a rate, projected onto tendon-consistent inputs and
/// scaled down uniformly to fit [u_min, u_max].
DlsCommand dls_step(const RobotShape& measured, const ActuatorState& state, const Vec3& target,
                    const SafeZone* zone, const DlsParams& params, const RobotGeometry& geom,
                    double dt, const ActuatorVector& u_min, const ActuatorVector& u_max);

/// Orthogonal projection onto inputs that satisfy the tendon coupling.
ActuatorVector project_coupling(const ActuatorVector& u);

}  // namespace tdcr
