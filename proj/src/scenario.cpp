#include "tdcr/scenario.hpp"

#include <cmath>
#include <fstream>

namespace tdcr {
namespace {

using nlohmann::json;

Vec3 vec3_from(const json& j) {
  if (!j.is_array() || j.size() != 3) throw InvalidInput("expected a 3-vector");
  return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

json vec_to_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

// Scalar s means s*I; a 12-array is a diagonal.
ActuatorMatrix weight_from(const json& j) {
  if (j.is_number()) return j.get<double>() * ActuatorMatrix::Identity();
  if (j.is_array() && j.size() == kActuators) {
    ActuatorVector d;
    for (int k = 0; k < kActuators; ++k) d[k] = j[k].get<double>();
    return d.asDiagonal();
  }
  throw InvalidInput("weights must be a scalar or a 12-array");
}

ActuatorVector actuator_vector_from(const json& j) {
  if (j.is_number()) return ActuatorVector::Constant(j.get<double>());
  if (j.is_object()) {
    ActuatorVector v;
    const double tendon = j.at("tendon").get<double>();
    const double backbone = j.at("backbone").get<double>();
    for (int s = 0; s < kSegments; ++s) {
      for (int m = 0; m < kTendonsPerSegment; ++m) v[tendon_index(s, m)] = tendon;
      v[length_index(s)] = backbone;
    }
    return v;
  }
  if (j.is_array() && j.size() == kActuators) {
    ActuatorVector v;
    for (int k = 0; k < kActuators; ++k) v[k] = j[k].get<double>();
    return v;
  }
  throw InvalidInput("expected a scalar, a 12-array or {tendon, backbone}");
}

template <class T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

ActuatorState initial_state_from(const json& j, const RobotGeometry& geom) {
  if (j.is_array()) return ActuatorState(actuator_vector_from(j));
  if (j.is_object() && j.contains("segment_lengths")) {
    const auto& l = j.at("segment_lengths");
    if (!l.is_array() || l.size() != kSegments) throw InvalidInput("segment_lengths needs 3 entries");
    ArcParameters arcs;
    for (int s = 0; s < kSegments; ++s) arcs[s] = {0.0, 0.0, l[s].get<double>()};
    return kinematics::arcs_to_actuators(arcs, geom);
  }
  if (j.is_object() && j.contains("arcs")) {
    const auto& a = j.at("arcs");
    if (!a.is_array() || a.size() != kSegments) throw InvalidInput("arcs needs 3 entries");
    ArcParameters arcs;
    for (int s = 0; s < kSegments; ++s)
      arcs[s] = {a[s].at("curvature").get<double>(), a[s].at("bend_plane").get<double>(),
                 a[s].at("length").get<double>()};
    return kinematics::arcs_to_actuators(arcs, geom);
  }
  throw InvalidInput("initial_state must be a 12-array or an object with segment_lengths or arcs");
}

}  // namespace

const char* to_string(ControllerKind kind) { return kind == ControllerKind::kMpc ? "mpc" : "dls"; }

ControllerKind controller_from_string(const std::string& name) {
  if (name == "mpc") return ControllerKind::kMpc;
  if (name == "dls") return ControllerKind::kDls;
  throw InvalidInput("unknown controller '" + name + "' (expected mpc or dls)");
}

void ScenarioConfig::validate() const {
  geometry.validate();
  mpc.validate();
  local.validate();
  dls.validate();
  disturbance.validate();
  if (!(rate_hz > 0.0)) throw InvalidInput("control rate must be positive");
  if (std::abs(mpc.dt * rate_hz - 1.0) > 1e-12) throw InvalidInput("MPC dt must equal 1/rate");
  if (!(duration > 0.0)) throw InvalidInput("duration must be positive");
  for (const Waypoint& w : waypoints) {
    if (!w.position.allFinite()) throw InvalidInput("waypoints must be finite");
    if (!(w.tolerance > 0.0) || w.dwell < 1) throw InvalidInput("waypoint tolerance/dwell must be positive");
  }
  if (initial_state && !initial_state->within(geometry)) throw InvalidInput("initial_state is outside the actuator box");
}

void ScenarioConfig::set_rate(double hz) {
  if (!(hz > 0.0)) throw InvalidInput("control rate must be positive");
  rate_hz = hz;
  mpc.dt = 1.0 / hz;
}

int ScenarioConfig::ticks() const { return static_cast<int>(std::llround(duration * rate_hz)); }

DisturbanceSpec ScenarioConfig::effective_disturbance() const {
  if (disturbances) return disturbance;
  DisturbanceSpec none = DisturbanceSpec::none();
  none.redraw_hz = disturbance.redraw_hz;
  none.seed = disturbance.seed;
  return none;
}

ActuatorState ScenarioConfig::start_state() const {
  return initial_state ? *initial_state : centered_straight_state(geometry);
}

ScenarioConfig config_from_json(const json& j, const std::filesystem::path& base_dir) {
  ScenarioConfig c;
  c.base_dir = base_dir;
  read(j, "name", c.name);
  if (j.contains("geometry")) {
    const json& g = j.at("geometry");
    read(g, "disks_per_segment", c.geometry.disks_per_segment);
    read(g, "tendon_radius", c.geometry.tendon_radius);
    read(g, "tendon_length_min", c.geometry.tendon_length_min);
    read(g, "tendon_length_max", c.geometry.tendon_length_max);
    read(g, "segment_length_min", c.geometry.segment_length_min);
    read(g, "segment_length_max", c.geometry.segment_length_max);
    read(g, "max_bend_angle", c.geometry.max_bend_angle);
    if (g.contains("tendon_angles")) {
      const auto& a = g.at("tendon_angles");
      for (int m = 0; m < kTendonsPerSegment; ++m) c.geometry.tendon_angles[m] = a.at(m).get<double>();
    }
  }
  if (j.contains("controller")) c.controller = controller_from_string(j.at("controller").get<std::string>());
  double rate = c.rate_hz;
  read(j, "rate_hz", rate);
  c.set_rate(rate);
  read(j, "duration_s", c.duration);
  read(j, "stop_when_done", c.stop_when_done);
  read(j, "shape_dump", c.shape_dump);
  read(j, "mesh", c.mesh);
  if (j.contains("safe_margin")) {
    c.mpc.safe_margin = c.dls.safe_margin = j.at("safe_margin").get<double>();
  }
  if (j.contains("mpc")) {
    const json& m = j.at("mpc");
    read(m, "horizon", c.mpc.horizon);
    if (m.contains("Q")) c.mpc.Q = m.at("Q").get<double>() * Eigen::Matrix3d::Identity();
    if (m.contains("R")) c.mpc.R = weight_from(m.at("R"));
    if (m.contains("S")) c.mpc.S = weight_from(m.at("S"));
    if (m.contains("u_max")) {
      c.mpc.u_max = actuator_vector_from(m.at("u_max"));
      c.mpc.u_min = -c.mpc.u_max;
    }
    if (m.contains("u_min")) c.mpc.u_min = actuator_vector_from(m.at("u_min"));
    read(m, "tol_c", c.mpc.tol_c);
    read(m, "tol_g", c.mpc.tol_g);
    read(m, "max_iterations", c.mpc.max_iterations);
  }
  if (j.contains("local")) {
    const json& l = j.at("local");
    read(l, "k_ee", c.local.k_ee);
    read(l, "k_body", c.local.k_body);
    read(l, "damping", c.local.damping);
    read(l, "coupled", c.local.coupled);
    read(l, "ee_only", c.ee_only_feedback);
  }
  if (j.contains("dls")) {
    const json& d = j.at("dls");
    read(d, "c_w", c.dls.c_w);
    read(d, "k_j", c.dls.k_j);
  }
  if (j.contains("disturbance")) {
    const json& d = j.at("disturbance");
    read(d, "enabled", c.disturbances);
    read(d, "sigma_x", c.disturbance.sigma_x);
    read(d, "sigma_y", c.disturbance.sigma_y);
    read(d, "wx_max", c.disturbance.wx_max);
    read(d, "wy_max", c.disturbance.wy_max);
    read(d, "redraw_hz", c.disturbance.redraw_hz);
  }
  read(j, "seed", c.disturbance.seed);
  if (j.contains("initial_state")) c.initial_state = initial_state_from(j.at("initial_state"), c.geometry);
  if (j.contains("waypoints")) {
    for (const json& w : j.at("waypoints")) {
      Waypoint wp;
      wp.position = vec3_from(w.at("position"));
      read(w, "tolerance", wp.tolerance);
      read(w, "dwell", wp.dwell);
      c.waypoints.push_back(wp);
    }
  }
  c.validate();
  return c;
}

json to_json(const ScenarioConfig& c) {
  json j;
  j["schema"] = "tdcr.scenario/1";
  j["name"] = c.name;
  j["controller"] = to_string(c.controller);
  j["rate_hz"] = c.rate_hz;
  j["duration_s"] = c.duration;
  j["seed"] = c.disturbance.seed;
  j["mesh"] = c.mesh;
  j["safe_margin"] = c.mpc.safe_margin;
  j["stop_when_done"] = c.stop_when_done;
  j["shape_dump"] = c.shape_dump;
  const RobotGeometry& g = c.geometry;
  j["geometry"] = {{"disks_per_segment", g.disks_per_segment},
                   {"tendon_radius", g.tendon_radius},
                   {"tendon_angles", g.tendon_angles},
                   {"tendon_length_min", g.tendon_length_min},
                   {"tendon_length_max", g.tendon_length_max},
                   {"segment_length_min", g.segment_length_min},
                   {"segment_length_max", g.segment_length_max},
                   {"max_bend_angle", g.max_bend_angle}};
  j["mpc"] = {{"horizon", c.mpc.horizon},
              {"Q", c.mpc.Q(0, 0)},
              {"R", vec_to_json(c.mpc.R.diagonal())},
              {"S", vec_to_json(c.mpc.S.diagonal())},
              {"u_min", vec_to_json(c.mpc.u_min)},
              {"u_max", vec_to_json(c.mpc.u_max)},
              {"tol_c", c.mpc.tol_c},
              {"tol_g", c.mpc.tol_g},
              {"max_iterations", c.mpc.max_iterations}};
  j["local"] = {{"k_ee", c.local.k_ee},
                {"k_body", c.local.k_body},
                {"damping", c.local.damping},
                {"coupled", c.local.coupled},
                {"ee_only", c.ee_only_feedback}};
  j["dls"] = {{"c_w", c.dls.c_w}, {"k_j", c.dls.k_j}};
  j["disturbance"] = {{"enabled", c.disturbances},
                      {"sigma_x", c.disturbance.sigma_x},
                      {"sigma_y", c.disturbance.sigma_y},
                      {"wx_max", c.disturbance.wx_max},
                      {"wy_max", c.disturbance.wy_max},
                      {"redraw_hz", c.disturbance.redraw_hz}};
  if (c.initial_state) j["initial_state"] = vec_to_json(c.initial_state->x);
  j["waypoints"] = json::array();
  for (const Waypoint& w : c.waypoints)
    j["waypoints"].push_back({{"position", {w.position.x(), w.position.y(), w.position.z()}},
                              {"tolerance", w.tolerance},
                              {"dwell", w.dwell}});
  return j;
}

ScenarioConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw IoError("malformed config " + path.string() + ": " + e.what());
  }
  try {
    return config_from_json(j, path.parent_path().empty() ? std::filesystem::path(".") : path.parent_path());
  } catch (const json::exception& e) {
    throw InvalidInput("invalid config " + path.string() + ": " + e.what());
  }
}

TriangleMesh builtin_mesh(const std::string& name) {
  if (name == "unit_cube") return mesh_primitives::unit_cube();
  if (name == "winding_tube") return mesh_primitives::winding_tube();
  if (name == "inverted_u") return mesh_primitives::inverted_u();
  if (name == "halfspace_box") return mesh_primitives::halfspace_box();
  throw InvalidInput("unknown builtin mesh '" + name + "'");
}

std::shared_ptr<const SafeZone> load_zone(const ScenarioConfig& config) {
  if (config.mesh.empty()) return nullptr;
  const std::string prefix = "builtin:";
  if (config.mesh.rfind(prefix, 0) == 0)
    return std::make_shared<const SafeZone>(builtin_mesh(config.mesh.substr(prefix.size())));
  std::filesystem::path p = config.mesh;
  if (p.is_relative()) p = config.base_dir / p;
  return std::make_shared<const SafeZone>(mesh_io::load_mesh(p));
}

}  // namespace tdcr
