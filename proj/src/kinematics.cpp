#include "tdcr/kinematics.hpp"

#include <optional>

#include <Eigen/Geometry>

namespace tdcr::kinematics {
namespace {

SegmentArc segment_arc(const ActuatorState& state, const RobotGeometry& geom, int j) {
  const double gamma = state.segment_length(j);
  if (!(gamma > 0.0)) throw InvalidState("segment length must be positive");

  double a = 0.0;
  double b = 0.0;
  for (int m = 0; m < kTendonsPerSegment; ++m) {
    const double dq = state.tendon(j, m) - gamma;
    a += dq * std::cos(geom.tendon_angles[m]);
    b += dq * std::sin(geom.tendon_angles[m]);
  }
  SegmentArc arc;
  arc.length = gamma;
  arc.curvature = 2.0 / (3.0 * gamma * geom.tendon_radius) * std::hypot(a, b);
  if (arc.curvature * geom.tendon_radius >= 1.0)
    throw KinematicLimit("segment curvature exceeds 1/r_t");
  if (arc.curvature > 0.0) {
    arc.bend_plane = std::atan2(-b, -a);
    if (arc.bend_plane >= std::numbers::pi) arc.bend_plane -= 2.0 * std::numbers::pi;
  }
  return arc;
}

// Pose at arc length s along a constant-curvature arc, relative to the arc base.
Eigen::Isometry3d arc_pose(const SegmentArc& arc, double s) {
  const double k = arc.curvature;
  double in_plane;  // (1 - cos ks) / k
  double axial;     // sin(ks) / k
  if (k < kStraightThreshold) {
    const double s2 = s * s;
    in_plane = k * s2 / 2.0 - k * k * k * s2 * s2 / 24.0;
    axial = s - k * k * s2 * s / 6.0;
  } else {
    const double half = std::sin(0.5 * k * s);
    in_plane = 2.0 * half * half / k;
    axial = std::sin(k * s) / k;
  }
  const double cphi = std::cos(arc.bend_plane);
  const double sphi = std::sin(arc.bend_plane);

  Eigen::Isometry3d pose = Eigen::Isometry3d::Identity();
  pose.linear() = (Eigen::AngleAxisd(arc.bend_plane, Vec3::UnitZ()) *
                   Eigen::AngleAxisd(k * s, Vec3::UnitY()) *
                   Eigen::AngleAxisd(-arc.bend_plane, Vec3::UnitZ()))
                      .toRotationMatrix();
  pose.translation() = Vec3(cphi * in_plane, sphi * in_plane, axial);
  return pose;
}

}  // namespace

ArcParameters actuators_to_arcs(const ActuatorState& state, const RobotGeometry& geom) {
  ArcParameters arcs;
  for (int j = 0; j < kSegments; ++j) arcs[j] = segment_arc(state, geom, j);
  return arcs;
}

ActuatorState arcs_to_actuators(const ArcParameters& arcs, const RobotGeometry& geom) {
  ActuatorState state;
  for (int j = 0; j < kSegments; ++j) {
    const SegmentArc& arc = arcs[j];
    for (int m = 0; m < kTendonsPerSegment; ++m) {
      state.x[tendon_index(j, m)] =
          arc.length * (1.0 - geom.tendon_radius * arc.curvature *
                                  std::cos(geom.tendon_angles[m] - arc.bend_plane));
    }
    state.x[length_index(j)] = arc.length;
  }
  return state;
}

RobotShape arcs_to_shape(const ArcParameters& arcs, const RobotGeometry& geom) {
  const int n = geom.disks_per_segment;
  RobotShape shape;
  shape.points.reserve(kSegments * n);
  Eigen::Isometry3d base = Eigen::Isometry3d::Identity();
  for (const SegmentArc& arc : arcs) {
    const double step = arc.length / n;
    for (int i = 1; i <= n; ++i) shape.points.push_back(base * arc_pose(arc, i * step).translation());
    base = base * arc_pose(arc, arc.length);
  }
  return shape;
}

RobotShape forward_kinematics(const ActuatorState& state, const RobotGeometry& geom) {
  return arcs_to_shape(actuators_to_arcs(state, geom), geom);
}

Vec3 tip_position(const ActuatorState& state, const RobotGeometry& geom) {
  const ArcParameters arcs = actuators_to_arcs(state, geom);
  Eigen::Isometry3d pose = Eigen::Isometry3d::Identity();
  for (const SegmentArc& arc : arcs) pose = pose * arc_pose(arc, arc.length);
  return pose.translation();
}

double segment_curvature(const ActuatorState& state, const RobotGeometry& geom, int segment) {
  if (segment < 0 || segment >= kSegments) throw InvalidInput("segment index out of range");
  return segment_arc(state, geom, segment).curvature;
}

double max_curvature(double segment_length, const RobotGeometry& geom) {
  return geom.max_bend_angle / segment_length;
}

std::vector<Jacobian> disk_jacobians(const ActuatorState& state, const RobotGeometry& geom,
                                     double step) {
  const ActuatorVector lb = geom.lower_bounds();
  const ActuatorVector ub = geom.upper_bounds();
  const int disks = geom.disk_count();
  std::vector<Jacobian> jac(disks, Jacobian::Zero());

  std::optional<RobotShape> center;
  for (int k = 0; k < kActuators; ++k) {
    const bool can_up = state.x[k] + step <= ub[k];
    const bool can_down = state.x[k] - step >= lb[k];
    ActuatorState hi = state;
    ActuatorState lo = state;
    double span = 2.0 * step;
    if (can_up && can_down) {
      hi.x[k] += step;
      lo.x[k] -= step;
    } else {
      if (!center) center = forward_kinematics(state, geom);
      span = step;
      if (can_down) {
        lo.x[k] -= step;
      } else {
        hi.x[k] += step;
      }
    }
    const RobotShape shape_hi = hi.x[k] == state.x[k] ? *center : forward_kinematics(hi, geom);
    const RobotShape shape_lo = lo.x[k] == state.x[k] ? *center : forward_kinematics(lo, geom);
    for (int i = 0; i < disks; ++i)
      jac[i].col(k) = (shape_hi.points[i] - shape_lo.points[i]) / span;
  }
  return jac;
}

Jacobian disk_jacobian(const ActuatorState& state, const RobotGeometry& geom, int disk,
                       double step) {
  if (disk < 1 || disk > geom.disk_count()) throw InvalidInput("disk index out of range");
  return disk_jacobians(state, geom, step)[disk - 1];
}

}  // namespace tdcr::kinematics
