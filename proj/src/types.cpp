#include "tdcr/types.hpp"

#include <algorithm>

namespace tdcr {

void RobotGeometry::validate() const {
  if (disks_per_segment < 2) throw InvalidInput("disks_per_segment must be >= 2");
  if (!(tendon_radius > 0.0)) throw InvalidInput("tendon_radius must be positive");
  if (!(segment_length_min > 0.0 && segment_length_min < segment_length_max))
    throw InvalidInput("segment length limits must satisfy 0 < min < max");
  if (!(tendon_length_min < tendon_length_max))
    throw InvalidInput("tendon length limits must satisfy min < max");
  if (!(max_bend_angle > 0.0)) throw InvalidInput("max_bend_angle must be positive");

  // The closed-form arc inversion needs three equally spaced routing angles.
  constexpr double kSpacing = 2.0 * std::numbers::pi / 3.0;
  for (int m = 1; m < kTendonsPerSegment; ++m) {
    double delta = std::remainder(tendon_angles[m] - tendon_angles[0] - m * kSpacing,
                                  2.0 * std::numbers::pi);
    if (std::abs(delta) > 1e-9)
      throw InvalidInput("tendon angles must be equally spaced by 2*pi/3");
  }
}

ActuatorVector RobotGeometry::lower_bounds() const {
  ActuatorVector lb;
  for (int j = 0; j < kSegments; ++j) {
    for (int m = 0; m < kTendonsPerSegment; ++m) lb[tendon_index(j, m)] = tendon_length_min;
    lb[length_index(j)] = segment_length_min;
  }
  return lb;
}

ActuatorVector RobotGeometry::upper_bounds() const {
  ActuatorVector ub;
  for (int j = 0; j < kSegments; ++j) {
    for (int m = 0; m < kTendonsPerSegment; ++m) ub[tendon_index(j, m)] = tendon_length_max;
    ub[length_index(j)] = segment_length_max;
  }
  return ub;
}

double ActuatorState::coupling_residual(int segment) const {
  double sum = 0.0;
  for (int m = 0; m < kTendonsPerSegment; ++m) sum += tendon(segment, m);
  return 3.0 * segment_length(segment) - sum;
}

bool ActuatorState::within(const RobotGeometry& geom, double tol) const {
  const ActuatorVector lb = geom.lower_bounds();
  const ActuatorVector ub = geom.upper_bounds();
  for (int k = 0; k < kActuators; ++k) {
    if (x[k] < lb[k] - tol || x[k] > ub[k] + tol) return false;
  }
  return true;
}

ActuatorState centered_straight_state(const RobotGeometry& geom) {
  const double center = 0.5 * (geom.segment_length_min + geom.segment_length_max);
  return ActuatorState(ActuatorVector::Constant(center));
}

}  // namespace tdcr
