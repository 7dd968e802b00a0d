#include "tdcr/plant.hpp"

#include <algorithm>
#include <cmath>

namespace tdcr {

void DisturbanceSpec::validate() const {
  if (!(sigma_x >= 0.0) || !(sigma_y >= 0.0)) throw InvalidInput("disturbance std must be >= 0");
  if (!(wx_max >= 0.0) || !(wy_max >= 0.0)) throw InvalidInput("disturbance bounds must be >= 0");
  if (!(redraw_hz > 0.0)) throw InvalidInput("redraw frequency must be positive");
}

DisturbanceSpec DisturbanceSpec::none() {
  DisturbanceSpec s;
  s.sigma_x = s.sigma_y = s.wx_max = s.wy_max = 0.0;
  return s;
}

double draw_clipped(std::mt19937_64& rng, double sigma, double max) {
  if (sigma == 0.0) return 0.0;
  std::normal_distribution<double> normal(0.0, sigma);
  return std::clamp(normal(rng), -max, max);
}

ActuatorVector apply_disturbance_state(const ActuatorVector& x, const ActuatorVector& wx) { return x + wx; }

PlantSim::PlantSim(RobotGeometry geom, DisturbanceSpec spec, double control_rate_hz, ActuatorState initial)
    : geom_(std::move(geom)), spec_(spec), x_(std::move(initial)), rng_(spec.seed) {
  geom_.validate();
  spec_.validate();
  if (!(control_rate_hz > 0.0)) throw InvalidInput("control rate must be positive");
  dt_ = 1.0 / control_rate_hz;
  lb_ = geom_.lower_bounds();
  ub_ = geom_.upper_bounds();
  wy_.assign(static_cast<std::size_t>(geom_.disk_count()), Vec3::Zero());
  redraw();
}

void PlantSim::redraw() {
  for (int k = 0; k < kActuators; ++k) wx_[k] = draw_clipped(rng_, spec_.sigma_x, spec_.wx_max);
  for (Vec3& w : wy_)
    for (int a = 0; a < 3; ++a) w[a] = draw_clipped(rng_, spec_.sigma_y, spec_.wy_max);
}

RobotShape PlantSim::step(const ActuatorVector& u) {
  const ActuatorVector next = x_.x + dt_ * u;
  last_clamps_ = 0;
  for (int k = 0; k < kActuators; ++k) {
    const double c = std::clamp(next[k], lb_[k], ub_[k]);
    if (c != next[k]) ++last_clamps_;
    x_.x[k] = c;
  }
  clamp_events_ += last_clamps_;
  ++tick_;
  // Zero-order hold: redraw whenever the tick crosses a redraw period boundary.
  const auto period = static_cast<std::int64_t>(std::floor(static_cast<double>(tick_) * dt_ * spec_.redraw_hz + 1e-9));
  if (period != period_) {
    period_ = period;
    redraw();
  }
  return measure();
}

RobotShape PlantSim::body_shape() const {
  return kinematics::forward_kinematics(ActuatorState(apply_disturbance_state(x_.x, wx_)), geom_);
}

RobotShape PlantSim::measure() const {
  RobotShape y = body_shape();
  for (std::size_t i = 0; i < y.size(); ++i) y.points[i] += wy_[i];
  return y;
}

Vec3 PlantSim::measure_ee_only() const { return measure().tip(); }

RobotShape PlantSim::true_shape() const { return kinematics::forward_kinematics(x_, geom_); }

}  // namespace tdcr
