#include "tdcr/control_loop.hpp"

#include <chrono>
#include <cmath>
#include <limits>

namespace tdcr {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double mean_body_deviation(const RobotShape& nominal, const RobotShape& measured) {
  const std::size_t body = nominal.size() - 1;
  double sum = 0.0;
  for (std::size_t i = 0; i < body; ++i) sum += (nominal.points[i] - measured.points[i]).norm();
  return sum / static_cast<double>(body);
}

}  // namespace

ControlLoop::ControlLoop(ScenarioConfig config, std::shared_ptr<const SafeZone> zone)
    : config_(std::move(config)), zone_(std::move(zone)) {
  config_.validate();
  reset();
}

void ControlLoop::reset() {
  plant_ = std::make_unique<PlantSim>(config_.geometry, config_.effective_disturbance(), config_.rate_hz,
                                      config_.start_state());
  mpc_ = std::make_unique<MpcController>(config_.mpc, config_.geometry, zone_.get());
  mpc_->reset(config_.start_state());
  measured_ = plant_->measure();
  nominal_ = kinematics::forward_kinematics(config_.start_state(), config_.geometry);
  last_target_.reset();
  faulted_ = false;
  fault_reason_.clear();
}

void ControlLoop::fill_real_margins(MetricsRecord& rec) const {
  if (!zone_) {
    rec.min_dist_real = rec.min_margin_real = rec.min_dist_meas = std::numeric_limits<double>::infinity();
    return;
  }
  auto min_distance = [&](const RobotShape& s) {
    double dmin = std::numeric_limits<double>::infinity();
    for (const Vec3& p : s.points) dmin = std::min(dmin, zone_->signed_distance(p));
    return dmin;
  };
  rec.min_dist_real = min_distance(body_);
  rec.min_margin_real = rec.min_dist_real - config_.mpc.safe_margin;
  rec.min_dist_meas = min_distance(measured_);
}

MetricsRecord ControlLoop::tick(const Vec3& target) {
  if (!target.allFinite()) throw InvalidInput("target must be finite");
  MetricsRecord rec;
  rec.tick = plant_->tick();
  rec.t = plant_->time();
  rec.target = target;
  rec.target_changed = !last_target_ || *last_target_ != target;
  last_target_ = target;
  rec.e_ee_real = (measured_.tip() - target).norm();
  body_ = plant_->body_shape();
  rec.e_ee_body = (body_.tip() - target).norm();
  fill_real_margins(rec);

  rec = config_.controller == ControllerKind::kMpc ? tick_mpc(target, rec) : tick_dls(target, rec);

  rec.u_norm = rec.u.norm();
  rec.u_inf = rec.u.lpNorm<Eigen::Infinity>();
  measured_ = plant_->step(rec.u);
  rec.clamps = plant_->last_step_clamps();
  return rec;
}

MetricsRecord ControlLoop::tick_mpc(const Vec3& target, MetricsRecord rec) {
  if (faulted_) {
    rec.status = "fault";
    rec.e_ee_nom = (nominal_.tip() - target).norm();
    rec.e_ee_local = (nominal_.tip() - measured_.tip()).norm();
    rec.e_body_local = mean_body_deviation(nominal_, measured_);
    rec.e_body_clean = mean_body_deviation(nominal_, body_);
    rec.min_margin_nom = rec.min_margin_pred = kNaN;
    return rec;
  }
  const MpcSolution& sol = mpc_->step(target);
  rec.status = to_string(sol.status);
  rec.iterations = sol.iterations;
  rec.active_constraints = sol.active_constraints;
  rec.solve_time_ms = sol.solve_time_ms;
  nominal_ = sol.outputs.front();
  const ActuatorState& x0 = sol.states.front();

  rec.e_ee_nom = (nominal_.tip() - target).norm();
  rec.e_ee_local = (nominal_.tip() - measured_.tip()).norm();
  rec.e_body_local = mean_body_deviation(nominal_, measured_);
  rec.e_body_clean = mean_body_deviation(nominal_, body_);
  rec.coupling_nom = 0.0;
  for (const ActuatorState& s : sol.states)
    for (int j = 0; j < kSegments; ++j) rec.coupling_nom = std::max(rec.coupling_nom, std::abs(s.coupling_residual(j)));
  if (zone_) {
    double m = std::numeric_limits<double>::infinity();
    for (const Vec3& p : nominal_.points) m = std::min(m, zone_->signed_distance(p));
    rec.min_margin_nom = m - config_.mpc.safe_margin;
    rec.min_margin_pred = sol.min_margin;
  } else {
    rec.min_margin_nom = rec.min_margin_pred = std::numeric_limits<double>::infinity();
  }

  if (sol.status == SolverStatus::kInfeasible) {
    faulted_ = true;
    fault_reason_ = "MPC infeasible at tick " + std::to_string(rec.tick);
    rec.status = "fault";
    return rec;  // zero input
  }

  rec.u_mpc = sol.first_input();
  const RobotShape feedback = config_.ee_only_feedback ? RobotShape{{measured_.tip()}} : measured_;
  rec.u_local = local_control(nominal_, feedback, x0, config_.local, config_.geometry);
  rec.u = rec.u_mpc + rec.u_local;
  rec.u_mpc_norm = rec.u_mpc.norm();
  rec.u_mpc_inf = rec.u_mpc.lpNorm<Eigen::Infinity>();
  rec.u_local_norm = rec.u_local.norm();
  return rec;
}

MetricsRecord ControlLoop::tick_dls(const Vec3& target, MetricsRecord rec) {
  rec.e_ee_nom = rec.e_ee_local = rec.e_body_local = rec.e_body_clean = kNaN;
  rec.min_margin_nom = rec.min_margin_pred = kNaN;
  // Actuator positions are known exactly (encoders); the controller linearizes there.
  const auto t0 = std::chrono::steady_clock::now();
  const DlsCommand cmd = dls_step(measured_, plant_->state(), target, zone_.get(), config_.dls,
                                  config_.geometry, config_.mpc.dt, config_.mpc.u_min, config_.mpc.u_max);
  rec.solve_time_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  rec.u = cmd.rate;
  rec.input_scaled = cmd.clamped();
  rec.status = "ok";
  return rec;
}

}  // namespace tdcr
