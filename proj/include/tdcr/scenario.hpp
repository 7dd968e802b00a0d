#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "tdcr/dls_controller.hpp"
#include "tdcr/local_controller.hpp"
#include "tdcr/mesh.hpp"
#include "tdcr/mpc.hpp"
#include "tdcr/plant.hpp"

namespace tdcr {

struct Waypoint {
  Vec3 position = Vec3::Zero();
  double tolerance = 2.0;  // mm
  int dwell = 15;          // consecutive ticks below tolerance
};

enum class ControllerKind { kMpc, kDls };

const char* to_string(ControllerKind kind);
ControllerKind controller_from_string(const std::string& name);

/// Everything needed to reproduce one closed-loop run. Loaded from JSON; see
/// README for the schema.
struct ScenarioConfig {
  std::string name = "scenario";
  RobotGeometry geometry;
  ControllerKind controller = ControllerKind::kMpc;
  MpcParams mpc;
  LocalGains local;
  bool ee_only_feedback = false;
  DlsParams dls;
  bool disturbances = true;
  DisturbanceSpec disturbance;
  /// Path (relative to base_dir) or "builtin:<name>"; empty disables collision handling.
  std::string mesh;
  std::filesystem::path base_dir = ".";
  std::optional<ActuatorState> initial_state;
  std::vector<Waypoint> waypoints;
  double duration = 20.0;  // s
  double rate_hz = 30.0;
  bool stop_when_done = false;
  bool shape_dump = false;

  /// Throws InvalidInput.
  void validate() const;
  /// Sets the control rate and the matching MPC step.
  void set_rate(double hz);
  void set_seed(std::uint64_t seed) { disturbance.seed = seed; }
  int ticks() const;
  DisturbanceSpec effective_disturbance() const;
  ActuatorState start_state() const;
};

ScenarioConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = ".");
nlohmann::json to_json(const ScenarioConfig& config);
ScenarioConfig load_config(const std::filesystem::path& path);

/// Resolves and loads the configured safe zone; nullptr when none is configured.
std::shared_ptr<const SafeZone> load_zone(const ScenarioConfig& config);

/// Built-in safe zones by name: unit_cube, winding_tube, inverted_u, halfspace_box.
TriangleMesh builtin_mesh(const std::string& name);

}  // namespace tdcr
