#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>

#include "tdcr/scenario.hpp"

namespace tdcr {

/// Everything recorded for one control tick. Quantities refer to the state
/// at the start of the tick (before the input is applied).
struct MetricsRecord {
  std::int64_t tick = 0;
  double t = 0.0;
  int waypoint = 0;
  Vec3 target = Vec3::Zero();
  double e_ee_real = 0.0;   // |p_tip(y) - p_d|
  double e_ee_nom = 0.0;    // |p̂_tip - p_d|; NaN for DLS
  double e_ee_local = 0.0;  // |p̂_tip - p_tip(y)|; NaN for DLS
  double e_body_local = 0.0;  // mean |p̂_i - p_i| over disks 1..3n-1; NaN for DLS
  double u_mpc_norm = 0.0;
  double u_mpc_inf = 0.0;
  double u_local_norm = 0.0;
  double u_norm = 0.0;
  double u_inf = 0.0;
  // Sensor noise cannot push the body into a wall, so the real margins use
  // f(x + w_x); the *_meas variant is the same on the measured output.
  double min_margin_real = 0.0;  // min_i d(p_i) - c_d on the robot body
  double min_dist_real = 0.0;    // min_i d(p_i)
  double min_dist_meas = 0.0;
  double e_ee_body = 0.0;        // e_ee_real without sensor noise
  double e_body_clean = 0.0;     // e_body_local without sensor noise; NaN for DLS
  double min_margin_nom = 0.0;   // on ŷ*[0|k]; NaN for DLS
  double min_margin_pred = 0.0;  // over ŷ*[1..N|k]; NaN for DLS
  double coupling_nom = 0.0;     // max_j |3γ̂_j - Σ q̂_jm|
  std::string status = "ok";
  int iterations = 0;
  int active_constraints = 0;
  int clamps = 0;           // plant actuator clamps in this tick
  bool input_scaled = false;  // DLS input scaled into the box
  bool target_changed = false;
  ActuatorVector u = ActuatorVector::Zero();
  ActuatorVector u_mpc = ActuatorVector::Zero();
  ActuatorVector u_local = ActuatorVector::Zero();
  double solve_time_ms = 0.0;  // wall clock; not part of the deterministic log
};

/// The closed loop measure -> control -> actuate, owning plant and
/// controllers. Used by the harness and the teleoperation service.
class ControlLoop {
 public:
  ControlLoop(ScenarioConfig config, std::shared_ptr<const SafeZone> zone);

  /// One control period toward `target`; returns the record of this tick.
  MetricsRecord tick(const Vec3& target);

  const ScenarioConfig& config() const { return config_; }
  const SafeZone* zone() const { return zone_.get(); }
  const RobotShape& measured() const { return measured_; }
  /// ŷ*[0|k] of the last tick (or the undisturbed start shape before the first).
  const RobotShape& nominal() const { return nominal_; }
  bool faulted() const { return faulted_; }
  const std::string& fault_reason() const { return fault_reason_; }
  std::int64_t ticks() const { return plant_->tick(); }
  const PlantSim& plant() const { return *plant_; }

  /// Restarts plant and controllers from the configured start state.
  void reset();

 private:
  MetricsRecord tick_mpc(const Vec3& target, MetricsRecord rec);
  MetricsRecord tick_dls(const Vec3& target, MetricsRecord rec);
  void fill_real_margins(MetricsRecord& rec) const;

  ScenarioConfig config_;
  std::shared_ptr<const SafeZone> zone_;
  std::unique_ptr<PlantSim> plant_;
  std::unique_ptr<MpcController> mpc_;
  RobotShape measured_;
  RobotShape body_;
  RobotShape nominal_;
  std::optional<Vec3> last_target_;
  bool faulted_ = false;
  std::string fault_reason_;
};

}  // namespace tdcr
