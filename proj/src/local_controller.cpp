#include "tdcr/local_controller.hpp"

#include "tdcr/mpc.hpp"

namespace tdcr {

void LocalGains::validate() const {
  if (!(k_ee >= 0.0) || !(k_body >= 0.0)) throw InvalidInput("local gains must be nonnegative");
  if (!(damping > 0.0)) throw InvalidInput("damping must be positive");
}

Eigen::MatrixXd damped_pseudoinverse(const Eigen::MatrixXd& J, double lambda) {
  Eigen::MatrixXd JtJ = J.transpose() * J;
  JtJ.diagonal().array() += lambda;
  return JtJ.ldlt().solve(J.transpose());
}

PseudoInverse damped_pseudoinverse(const Jacobian& J, double lambda) {
  return damped_pseudoinverse(Eigen::MatrixXd(J), lambda);
}

namespace {

void check_sizes(const RobotShape& nominal, const RobotShape& measured) {
  if (nominal.size() != measured.size() || nominal.size() < 2)
    throw InvalidInput("nominal and measured shapes must have the same length >= 2");
}

}  // namespace

double body_error(const RobotShape& nominal, const RobotShape& measured) {
  check_sizes(nominal, measured);
  const std::size_t body = nominal.size() - 1;
  double sum = 0.0;
  for (std::size_t i = 0; i < body; ++i) sum += (nominal.points[i] - measured.points[i]).squaredNorm();
  return sum / static_cast<double>(body);
}

ActuatorVector body_error_gradient(const RobotShape& nominal, const RobotShape& measured,
                                   const std::vector<Jacobian>& jacobians) {
  check_sizes(nominal, measured);
  if (jacobians.size() != nominal.size()) throw InvalidInput("one Jacobian per disk required");
  const std::size_t body = nominal.size() - 1;
  ActuatorVector g = ActuatorVector::Zero();
  for (std::size_t i = 0; i < body; ++i)
    g += jacobians[i].transpose() * (nominal.points[i] - measured.points[i]);
  return (2.0 / static_cast<double>(body)) * g;
}

Eigen::Matrix<double, kActuators, 9> coupling_orthobasis() {
  Eigen::Matrix<double, kActuators, 9> B = coupling_basis();
  for (int j = 0; j < kSegments; ++j) B.col(3 * j) *= 0.5;  // (1,1,1,1)/2
  return B;
}

LocalControlTerms local_control_terms(const RobotShape& nominal, const RobotShape& measured,
                                      const ActuatorState& state, const LocalGains& gains,
                                      const RobotGeometry& geom) {
  const bool ee_only = measured.size() == 1;
  if (!ee_only && measured.size() != nominal.size())
    throw InvalidInput("measured shape must hold every disk or only the tip");
  if (nominal.size() != static_cast<std::size_t>(geom.disk_count()))
    throw InvalidInput("nominal shape has the wrong number of disks");

  LocalControlTerms out;
  const Vec3 delta_ee = nominal.tip() - measured.tip();
  const double k_body = ee_only ? 0.0 : gains.k_body;
  if (delta_ee.isZero(0.0) && (k_body == 0.0 || body_error(nominal, measured) == 0.0)) return out;

  const std::vector<Jacobian> jac = kinematics::disk_jacobians(state, geom);
  const Jacobian& J = jac.back();
  const ActuatorVector grad =
      k_body > 0.0 ? body_error_gradient(nominal, measured, jac) : ActuatorVector::Zero();

  if (gains.coupled) {
    const Eigen::Matrix<double, kActuators, 9> B = coupling_orthobasis();
    const Eigen::Matrix<double, 3, 9> JB = J * B;
    const Eigen::Matrix<double, 9, 3> pinv = damped_pseudoinverse(Eigen::MatrixXd(JB), gains.damping);
    out.ee = B * (gains.k_ee * pinv * delta_ee);
    if (k_body > 0.0) {
      const Eigen::Matrix<double, 9, 9> N = Eigen::Matrix<double, 9, 9>::Identity() - pinv * JB;
      out.body = B * (k_body * N * (B.transpose() * grad));
    }
  } else {
    const PseudoInverse pinv = damped_pseudoinverse(J, gains.damping);
    out.ee = gains.k_ee * pinv * delta_ee;
    if (k_body > 0.0) out.body = k_body * (ActuatorMatrix::Identity() - pinv * J) * grad;
  }
  return out;
}

ActuatorVector local_control(const RobotShape& nominal, const RobotShape& measured,
                             const ActuatorState& state, const LocalGains& gains,
                             const RobotGeometry& geom) {
  return local_control_terms(nominal, measured, state, gains, geom).total();
}

}  // namespace tdcr
