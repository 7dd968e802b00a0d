#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "tdcr/control_loop.hpp"

namespace httplib {
class Server;
}

namespace tdcr {

/// Message schema identifiers. Bump on incompatible change.
inline constexpr const char* kStateSchema = "tdcr.state/1";
inline constexpr const char* kAckSchema = "tdcr.ack/1";
inline constexpr const char* kMeshSchema = "tdcr.mesh/1";

enum class LoopStatus { kRunning, kPaused, kFault };
const char* to_string(LoopStatus status);

struct TeleopOptions {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 picks a free port
  /// Simulated seconds per wall-clock second; 1 is real time.
  double speed = 1.0;
  /// Snapshots buffered per subscriber before it counts as too slow.
  std::size_t queue_capacity = 64;
  bool start_paused = false;
};

struct TargetAck {
  bool accepted = false;
  bool inside = false;     // advisory only
  double signed_distance = 0.0;
  std::int64_t arrival_tick = 0;  // first tick that uses the target
  Vec3 target = Vec3::Zero();
  nlohmann::json to_json() const;
};

struct TargetEvent {
  std::int64_t arrival_tick = 0;
  Vec3 target = Vec3::Zero();
};

/// Bounded per-subscriber snapshot queue. The loop never waits on it; a full
/// queue disconnects the subscriber instead.
class Subscription {
 public:
  explicit Subscription(std::size_t capacity) : capacity_(capacity) {}
  /// Blocks up to `timeout_ms`; nullopt on timeout or after disconnect.
  std::optional<std::string> next(int timeout_ms);
  bool connected() const;
  void close();

 private:
  friend class TeleopService;
  bool offer(const std::string& message);

  std::size_t capacity_;
  mutable std::mutex mutex_;
  std::condition_variable cv_;
  std::deque<std::string> queue_;
  bool connected_ = true;
};

/// Hosts the closed loop on its own thread and exposes it over HTTP:
///   GET  /api/v1/stream   server-sent events, one tdcr.state/1 per tick
///   GET  /api/v1/state    latest snapshot
///   POST /api/v1/target   {"target":[x,y,z]} -> tdcr.ack/1
///   POST /api/v1/pause | /api/v1/resume | /api/v1/reset
///   GET  /api/v1/mesh     tdcr.mesh/1 (404 without a safe zone)
///   GET  /api/v1/config   scenario config
class TeleopService {
 public:
  TeleopService(ScenarioConfig config, std::shared_ptr<const SafeZone> zone, TeleopOptions options = {});
  ~TeleopService();
  TeleopService(const TeleopService&) = delete;
  TeleopService& operator=(const TeleopService&) = delete;

  /// Binds the port and starts loop and server threads. Throws IoError if the port cannot be bound.
  void start();
  void stop();
  int port() const { return port_; }

  /// Throws InvalidInput for non-finite targets.
  TargetAck set_target(const Vec3& target);
  void pause();
  void resume();
  /// Clears a fault and restarts plant and controllers.
  void reset();

  LoopStatus status() const;
  std::int64_t tick() const;
  nlohmann::json latest_snapshot() const;
  std::shared_ptr<Subscription> subscribe();
  nlohmann::json mesh_json() const;
  nlohmann::json config_json() const;

  std::vector<MetricsRecord> metrics() const;
  std::vector<TargetEvent> target_events() const;
  /// Wall-clock start time of each tick relative to the first, in ms.
  std::vector<double> tick_wall_times_ms() const;

 private:
  void loop_thread();
  void publish(const nlohmann::json& snapshot);
  nlohmann::json make_snapshot(const MetricsRecord* rec) const;

  ScenarioConfig config_;
  std::shared_ptr<const SafeZone> zone_;
  TeleopOptions options_;
  std::unique_ptr<httplib::Server> server_;
  std::thread server_thread_;
  std::thread loop_thread_;
  std::atomic<bool> stop_{false};
  int port_ = 0;

  mutable std::mutex state_mutex_;  // guards everything below
  ControlLoop loop_;
  Vec3 target_;
  std::optional<Vec3> pending_target_;
  LoopStatus status_ = LoopStatus::kRunning;
  bool reset_requested_ = false;
  nlohmann::json latest_;
  std::string latest_text_;
  std::vector<std::weak_ptr<Subscription>> subscribers_;
  std::vector<MetricsRecord> metrics_;
  std::vector<TargetEvent> target_events_;
  std::vector<double> wall_ms_;
};

}  // namespace tdcr
