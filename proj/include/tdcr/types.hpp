#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace tdcr {

inline constexpr int kSegments = 3;
inline constexpr int kTendonsPerSegment = 3;
inline constexpr int kActuators = kSegments * (kTendonsPerSegment + 1);

using Vec3 = Eigen::Vector3d;
using ActuatorVector = Eigen::Matrix<double, kActuators, 1>;
using ActuatorMatrix = Eigen::Matrix<double, kActuators, kActuators>;
using Jacobian = Eigen::Matrix<double, 3, kActuators>;

// ---------------------------------------------------------------------------
// Errors

class InvalidState : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class KinematicLimit : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Robot description

/// Static description of a three-segment tendon-driven continuum robot.
/// Lengths in mm, angles in rad.
struct RobotGeometry {
  int disks_per_segment = 10;
  double tendon_radius = 8.0;
  std::array<double, kTendonsPerSegment> tendon_angles{
      0.0, 2.0 * std::numbers::pi / 3.0, 4.0 * std::numbers::pi / 3.0};
  double tendon_length_min = 20.0;
  double tendon_length_max = 140.0;
  double segment_length_min = 40.0;
  double segment_length_max = 100.0;
  double max_bend_angle = 2.0 * std::numbers::pi / 3.0;

  int disk_count() const { return kSegments * disks_per_segment; }

  /// Throws InvalidInput when the geometry violates its invariants.
  void validate() const;

  ActuatorVector lower_bounds() const;
  ActuatorVector upper_bounds() const;
};

/// Index of tendon m (0-based) of segment j (0-based) in the actuator vector.
constexpr int tendon_index(int segment, int tendon) { return 4 * segment + tendon; }
/// Index of the backbone length of segment j (0-based).
constexpr int length_index(int segment) { return 4 * segment + 3; }

/// The 12 actuator lengths (q11, q12, q13, gamma1, q21, ..., gamma3) in mm.
struct ActuatorState {
  ActuatorVector x = ActuatorVector::Zero();

  ActuatorState() = default;
  explicit ActuatorState(const ActuatorVector& v) : x(v) {}

  double tendon(int segment, int tendon) const { return x[tendon_index(segment, tendon)]; }
  double segment_length(int segment) const { return x[length_index(segment)]; }

  /// 3*gamma_j - sum_m q_jm; zero for a tendon-consistent segment.
  double coupling_residual(int segment) const;
  bool within(const RobotGeometry& geom, double tol = 0.0) const;
};

/// Straight configuration with every actuator at the center of the segment length box.
ActuatorState centered_straight_state(const RobotGeometry& geom);

struct SegmentArc {
  double curvature = 0.0;  // 1/mm, >= 0
  double bend_plane = 0.0; // rad in [-pi, pi)
  double length = 0.0;     // mm
};

using ArcParameters = std::array<SegmentArc, kSegments>;

/// Disk positions p_1 .. p_{3n} in the base frame; the base disk at the origin is implicit.
struct RobotShape {
  std::vector<Vec3> points;

  std::size_t size() const { return points.size(); }
  const Vec3& tip() const { return points.back(); }
};

}  // namespace tdcr
