#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include "json.hpp"
#include "tdcr/control_loop.hpp"

namespace tdcr {

struct WaypointResult {
  Waypoint waypoint;
  std::optional<double> reached_at;  // s; set once the predicate held for the full dwell
  std::optional<double> settle_time;  // s after the waypoint became active; see summarize()
};

struct RunResult {
  ScenarioConfig config;
  std::vector<MetricsRecord> records;
  std::vector<WaypointResult> waypoints;
  std::vector<std::pair<RobotShape, RobotShape>> shapes;  // (measured, nominal) per tick when dumped
  nlohmann::json summary;
};

/// Runs the closed loop for config.ticks() periods. Throws std::runtime_error
/// if the MPC is infeasible at the first tick and IoError/MeshInvalid if the
/// safe zone cannot be loaded.
RunResult run_scenario(const ScenarioConfig& config);
RunResult run_scenario(const ScenarioConfig& config, std::shared_ptr<const SafeZone> zone);

/// Aggregate statistics of a finished run.
nlohmann::json summarize(const RunResult& run);

struct Comparison {
  RunResult a;
  RunResult b;
  nlohmann::json report;
};

/// Both configs must share seed, rate and safe zone.
Comparison run_comparison(const ScenarioConfig& a, const ScenarioConfig& b);

struct TimingStats {
  int samples = 0;
  double mean_ms = 0.0;
  double p95_ms = 0.0;
  double max_ms = 0.0;
};

TimingStats timing_stats(std::vector<double> samples_ms);

/// Controller computation time per tick over `repetitions` full runs.
TimingStats benchmark_solver(const ScenarioConfig& config, int repetitions);

void write_metrics_csv(const std::vector<MetricsRecord>& records, const std::filesystem::path& path);
/// Writes metrics.csv, timing.csv, summary.json and (optionally) shapes.jsonl into dir.
void write_run(const RunResult& run, const std::filesystem::path& dir);

}  // namespace tdcr
