#include "tdcr/dls_controller.hpp"

#include <algorithm>

#include "tdcr/local_controller.hpp"

namespace tdcr {

void DlsParams::validate() const {
  if (!(c_w > 0.0) || !(k_j > 0.0)) throw InvalidInput("DLS c_w and k_j must be positive");
  if (!(safe_margin > 0.0)) throw InvalidInput("safe margin c_d must be positive");
}

double collision_cost(const RobotShape& shape, const SafeZone& zone, double safe_margin) {
  double h = 0.0;
  for (std::size_t i = 0; i + 1 < shape.size(); ++i) {
    const double r = std::max(0.0, safe_margin - zone.signed_distance(shape.points[i]));
    h += r * r;
  }
  return h;
}

ActuatorVector collision_cost_gradient(const RobotShape& shape, const std::vector<Jacobian>& jacobians,
                                       const SafeZone& zone, double safe_margin) {
  if (jacobians.size() != shape.size()) throw InvalidInput("one Jacobian per disk required");
  ActuatorVector g = ActuatorVector::Zero();
  for (std::size_t i = 0; i + 1 < shape.size(); ++i) {
    const SdfResult q = zone.query(shape.points[i]);
    const double r = safe_margin - q.distance;
    if (r > 0.0) g -= 2.0 * r * jacobians[i].transpose() * q.gradient;
  }
  return g;
}

ActuatorVector dls_law(const RobotShape& measured, const ActuatorState& state, const Vec3& target,
                       const SafeZone* zone, const DlsParams& params, const RobotGeometry& geom) {
  const std::vector<Jacobian> jac = kinematics::disk_jacobians(state, geom);
  const Jacobian& J = jac.back();
  ActuatorMatrix A = J.transpose() * J;
  A.diagonal().array() += params.c_w;
  ActuatorVector rhs = J.transpose() * (target - measured.tip());
  if (zone) rhs -= params.c_w * collision_cost_gradient(measured, jac, *zone, params.safe_margin);
  return params.k_j * A.ldlt().solve(rhs);
}

ActuatorVector project_coupling(const ActuatorVector& u) {
  const Eigen::Matrix<double, kActuators, 9> B = coupling_orthobasis();
  return B * (B.transpose() * u);
}

DlsCommand dls_step(const RobotShape& measured, const ActuatorState& state, const Vec3& target,
                    const SafeZone* zone, const DlsParams& params, const RobotGeometry& geom,
                    double dt, const ActuatorVector& u_min, const ActuatorVector& u_max) {
  DlsCommand cmd;
  cmd.raw = dls_law(measured, state, target, zone, params, geom) / dt;
  const ActuatorVector projected = project_coupling(cmd.raw);
  cmd.coupling_correction = (cmd.raw - projected).norm();
  for (int k = 0; k < kActuators; ++k) {
    if (projected[k] > u_max[k]) cmd.scale = std::min(cmd.scale, u_max[k] / projected[k]);
    if (projected[k] < u_min[k]) cmd.scale = std::min(cmd.scale, u_min[k] / projected[k]);
  }
  cmd.rate = cmd.scale * projected;
  return cmd;
}

}  // namespace tdcr
