#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "tdcr/kinematics.hpp"
#include "tdcr/types.hpp"

namespace tdcr {

struct DisturbanceSpec {
  double sigma_x = 0.2;  // mm, state disturbance std
  double sigma_y = 1.0;  // mm, output disturbance std
  double wx_max = 2.0;
  double wy_max = 5.0;
  double redraw_hz = 5.0;
  std::uint64_t seed = 0;

  void validate() const;
  /// All magnitudes zero.
  static DisturbanceSpec none();
};

/// One clipped normal draw: N(0, sigma^2) truncated by clamping to [-max, max].
double draw_clipped(std::mt19937_64& rng, double sigma, double max);

/// x + w_x, componentwise.
ActuatorVector apply_disturbance_state(const ActuatorVector& x, const ActuatorVector& wx);

/// Quasi-static integrator plant with held, periodically redrawn disturbances:
///   x[k] = clamp(x[k-1] + dt u[k]),   y[k] = f(x[k] + w_x) + w_y.
class PlantSim {
 public:
  PlantSim(RobotGeometry geom, DisturbanceSpec spec, double control_rate_hz, ActuatorState initial);

  /// Applies u for one control period and returns the new measurement.
  RobotShape step(const ActuatorVector& u);
  RobotShape measure() const;
  Vec3 measure_ee_only() const;

  /// Undisturbed output f(x) of the true state.
  RobotShape true_shape() const;
  /// f(x + w_x): the disturbed robot body before sensor noise.
  RobotShape body_shape() const;

  const ActuatorState& state() const { return x_; }
  const ActuatorVector& wx() const { return wx_; }
  const std::vector<Vec3>& wy() const { return wy_; }
  std::int64_t tick() const { return tick_; }
  double time() const { return static_cast<double>(tick_) * dt_; }
  double dt() const { return dt_; }
  /// Number of actuator components clamped at the box so far, and in the last step.
  int clamp_events() const { return clamp_events_; }
  int last_step_clamps() const { return last_clamps_; }

 private:
  void redraw();

  RobotGeometry geom_;
  DisturbanceSpec spec_;
  double dt_;
  ActuatorVector lb_;
  ActuatorVector ub_;
  ActuatorState x_;
  ActuatorVector wx_ = ActuatorVector::Zero();
  std::vector<Vec3> wy_;
  std::mt19937_64 rng_;
  std::int64_t tick_ = 0;
  std::int64_t period_ = 0;
  int clamp_events_ = 0;
  int last_clamps_ = 0;
};

}  // namespace tdcr
