#include "tdcr/teleop.hpp"

#include <chrono>
#include <cmath>

#include "httplib.h"

namespace tdcr {
namespace {

using Clock = std::chrono::steady_clock;
using nlohmann::json;

json vec_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

json shape_json(const RobotShape& s) {
  json out = json::array();
  for (const Vec3& p : s.points) out.push_back(vec_json(p));
  return out;
}

// JSON has no inf/nan; send null instead.
json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

void reply_json(httplib::Response& res, const json& body, int status = 200) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void reply_error(httplib::Response& res, int status, const std::string& message) {
  reply_json(res, {{"error", message}}, status);
}

}  // namespace

const char* to_string(LoopStatus status) {
  switch (status) {
    case LoopStatus::kRunning: return "running";
    case LoopStatus::kPaused: return "paused";
    case LoopStatus::kFault: return "fault";
  }
  return "unknown";
}

json TargetAck::to_json() const {
  return {{"schema", kAckSchema},     {"accepted", accepted},
          {"inside", inside},         {"signed_distance", finite_or_null(signed_distance)},
          {"arrival_tick", arrival_tick}, {"target", vec_json(target)}};
}

// ---------------------------------------------------------------------------

std::optional<std::string> Subscription::next(int timeout_ms) {
  std::unique_lock lock(mutex_);
  cv_.wait_for(lock, std::chrono::milliseconds(timeout_ms), [&] { return !queue_.empty() || !connected_; });
  if (queue_.empty()) return std::nullopt;
  std::string msg = std::move(queue_.front());
  queue_.pop_front();
  return msg;
}

bool Subscription::connected() const {
  std::lock_guard lock(mutex_);
  return connected_;
}

void Subscription::close() {
  {
    std::lock_guard lock(mutex_);
    connected_ = false;
  }
  cv_.notify_all();
}

bool Subscription::offer(const std::string& message) {
  {
    std::lock_guard lock(mutex_);
    if (!connected_) return false;
    if (queue_.size() >= capacity_) {
      // Too slow to keep up; drop it rather than stall the loop.
      connected_ = false;
      queue_.clear();
    } else {
      queue_.push_back(message);
    }
  }
  cv_.notify_all();
  return connected();
}

// ---------------------------------------------------------------------------

TeleopService::TeleopService(ScenarioConfig config, std::shared_ptr<const SafeZone> zone, TeleopOptions options)
    : config_(std::move(config)),
      zone_(std::move(zone)),
      options_(std::move(options)),
      loop_(config_, zone_) {
  if (!(options_.speed > 0.0) || !std::isfinite(options_.speed)) throw InvalidInput("speed must be positive");
  if (options_.queue_capacity == 0) throw InvalidInput("queue_capacity must be positive");
  // Hold the start configuration until an operator sends a target.
  target_ = loop_.nominal().tip();
  status_ = options_.start_paused ? LoopStatus::kPaused : LoopStatus::kRunning;
  latest_ = make_snapshot(nullptr);
  latest_text_ = latest_.dump();
}

TeleopService::~TeleopService() { stop(); }

json TeleopService::make_snapshot(const MetricsRecord* rec) const {
  json j = {{"schema", kStateSchema},
            {"tick", loop_.ticks()},
            {"t", loop_.plant().time()},
            {"status", to_string(status_)},
            {"target", vec_json(target_)},
            {"measured", shape_json(loop_.measured())},
            {"nominal", shape_json(loop_.nominal())},
            {"controller", to_string(config_.controller)},
            {"mesh", config_.mesh}};
  if (loop_.faulted()) j["fault"] = loop_.fault_reason();
  if (rec) {
    j["metrics"] = {{"tick", rec->tick},
                    {"e_ee_real", finite_or_null(rec->e_ee_real)},
                    {"e_ee_nom", finite_or_null(rec->e_ee_nom)},
                    {"e_ee_local", finite_or_null(rec->e_ee_local)},
                    {"e_body_local", finite_or_null(rec->e_body_local)},
                    {"min_margin_real", finite_or_null(rec->min_margin_real)},
                    {"min_dist_real", finite_or_null(rec->min_dist_real)},
                    {"min_margin_nom", finite_or_null(rec->min_margin_nom)},
                    {"u_norm", rec->u_norm},
                    {"solver_status", rec->status},
                    {"solve_time_ms", rec->solve_time_ms}};
  }
  return j;
}

void TeleopService::publish(const json& snapshot) {
  // Caller holds state_mutex_.
  latest_ = snapshot;
  latest_text_ = snapshot.dump();
  std::erase_if(subscribers_, [&](const std::weak_ptr<Subscription>& w) {
    auto sub = w.lock();
    return !sub || !sub->offer(latest_text_);
  });
}

void TeleopService::loop_thread() {
  const auto period = std::chrono::duration_cast<Clock::duration>(
      std::chrono::duration<double>(1.0 / (config_.rate_hz * options_.speed)));
  const auto origin = Clock::now();
  auto next = origin;
  while (!stop_.load()) {
    next += period;
    {
      std::lock_guard lock(state_mutex_);
      if (reset_requested_) {
        loop_.reset();
        target_ = loop_.nominal().tip();
        pending_target_.reset();
        metrics_.clear();
        wall_ms_.clear();
        reset_requested_ = false;
        status_ = LoopStatus::kRunning;
        publish(make_snapshot(nullptr));
      }
      if (status_ != LoopStatus::kPaused) {
        wall_ms_.push_back(std::chrono::duration<double, std::milli>(Clock::now() - origin).count());
        if (pending_target_) {
          target_ = *pending_target_;
          pending_target_.reset();
        }
        const MetricsRecord rec = loop_.tick(target_);
        if (loop_.faulted()) status_ = LoopStatus::kFault;
        metrics_.push_back(rec);
        publish(make_snapshot(&rec));
      }
    }
    std::this_thread::sleep_until(next);
    // Fell far behind (debugger, suspended process): resynchronize.
    if (Clock::now() > next + 10 * period) next = Clock::now();
  }
}

void TeleopService::start() {
  if (loop_thread_.joinable()) return;
  server_ = std::make_unique<httplib::Server>();
  auto& srv = *server_;

  srv.Get("/api/v1/stream", [this](const httplib::Request&, httplib::Response& res) {
    auto sub = subscribe();
    res.set_header("Cache-Control", "no-cache");
    res.set_chunked_content_provider(
        "text/event-stream",
        [this, sub](size_t, httplib::DataSink& sink) {
          while (!stop_.load()) {
            auto msg = sub->next(200);
            if (!msg) {
              if (!sub->connected()) {
                sink.done();
                return false;
              }
              if (!sink.is_writable()) return false;
              continue;
            }
            const std::string event = "event: state\ndata: " + *msg + "\n\n";
            if (!sink.write(event.data(), event.size())) {
              sub->close();
              return false;
            }
          }
          sink.done();
          return true;
        },
        [sub](bool) { sub->close(); });
  });

  srv.Get("/api/v1/state", [this](const httplib::Request&, httplib::Response& res) {
    reply_json(res, latest_snapshot());
  });

  srv.Post("/api/v1/target", [this](const httplib::Request& req, httplib::Response& res) {
    Vec3 target;
    try {
      const json body = json::parse(req.body);
      const json& t = body.at("target");
      if (!t.is_array() || t.size() != 3) throw InvalidInput("target must be an array of 3 numbers");
      for (int k = 0; k < 3; ++k) {
        // nlohmann parses NaN/Infinity literals only as strings; reject anything non-numeric.
        if (!t[k].is_number()) throw InvalidInput("target entries must be numbers");
        target[k] = t[k].get<double>();
      }
      reply_json(res, set_target(target).to_json());
    } catch (const std::exception& e) {
      reply_error(res, 400, e.what());
    }
  });

  srv.Post("/api/v1/pause", [this](const httplib::Request&, httplib::Response& res) {
    pause();
    reply_json(res, {{"status", to_string(status())}});
  });
  srv.Post("/api/v1/resume", [this](const httplib::Request&, httplib::Response& res) {
    resume();
    reply_json(res, {{"status", to_string(status())}});
  });
  srv.Post("/api/v1/reset", [this](const httplib::Request&, httplib::Response& res) {
    reset();
    reply_json(res, {{"status", "reset"}});
  });

  srv.Get("/api/v1/mesh", [this](const httplib::Request&, httplib::Response& res) {
    if (!zone_) return reply_error(res, 404, "no safe zone configured");
    reply_json(res, mesh_json());
  });
  srv.Get("/api/v1/config", [this](const httplib::Request&, httplib::Response& res) {
    reply_json(res, config_json());
  });

  if (options_.port == 0) {
    port_ = srv.bind_to_any_port(options_.host);
    if (port_ < 0) throw IoError("cannot bind " + options_.host);
  } else {
    if (!srv.bind_to_port(options_.host, options_.port))
      throw IoError("cannot bind " + options_.host + ":" + std::to_string(options_.port));
    port_ = options_.port;
  }
  stop_ = false;
  server_thread_ = std::thread([this] { server_->listen_after_bind(); });
  loop_thread_ = std::thread([this] { loop_thread(); });
}

void TeleopService::stop() {
  if (!loop_thread_.joinable() && !server_thread_.joinable()) return;
  stop_ = true;
  {
    std::lock_guard lock(state_mutex_);
    for (auto& w : subscribers_)
      if (auto s = w.lock()) s->close();
    subscribers_.clear();
  }
  if (loop_thread_.joinable()) loop_thread_.join();
  if (server_) server_->stop();
  if (server_thread_.joinable()) server_thread_.join();
}

TargetAck TeleopService::set_target(const Vec3& target) {
  if (!target.allFinite()) throw InvalidInput("target must be finite");
  TargetAck ack;
  ack.accepted = true;
  ack.target = target;
  if (zone_) {
    ack.signed_distance = zone_->signed_distance(target);
    ack.inside = ack.signed_distance > 0.0;
  } else {
    ack.signed_distance = std::numeric_limits<double>::infinity();
    ack.inside = true;
  }
  std::lock_guard lock(state_mutex_);
  pending_target_ = target;
  // Applied at the start of the next tick; while paused that is the tick after resume.
  ack.arrival_tick = loop_.ticks();
  target_events_.push_back({ack.arrival_tick, target});
  return ack;
}

void TeleopService::pause() {
  std::lock_guard lock(state_mutex_);
  if (status_ == LoopStatus::kRunning) {
    status_ = LoopStatus::kPaused;
    publish(make_snapshot(nullptr));
  }
}

void TeleopService::resume() {
  std::lock_guard lock(state_mutex_);
  // A fault only clears through reset.
  if (status_ == LoopStatus::kPaused) status_ = LoopStatus::kRunning;
}

void TeleopService::reset() {
  std::lock_guard lock(state_mutex_);
  if (loop_thread_.joinable()) {
    reset_requested_ = true;
    return;
  }
  loop_.reset();
  target_ = loop_.nominal().tip();
  pending_target_.reset();
  metrics_.clear();
  wall_ms_.clear();
  status_ = LoopStatus::kRunning;
  publish(make_snapshot(nullptr));
}

LoopStatus TeleopService::status() const {
  std::lock_guard lock(state_mutex_);
  return status_;
}

std::int64_t TeleopService::tick() const {
  std::lock_guard lock(state_mutex_);
  return loop_.ticks();
}

json TeleopService::latest_snapshot() const {
  std::lock_guard lock(state_mutex_);
  return latest_;
}

std::shared_ptr<Subscription> TeleopService::subscribe() {
  auto sub = std::make_shared<Subscription>(options_.queue_capacity);
  std::lock_guard lock(state_mutex_);
  // Late joiners start from the latest snapshot.
  sub->offer(latest_text_);
  subscribers_.push_back(sub);
  return sub;
}

json TeleopService::mesh_json() const {
  if (!zone_) return nullptr;
  json verts = json::array();
  for (const Vec3& v : zone_->vertices()) verts.push_back(vec_json(v));
  json tris = json::array();
  for (const auto& t : zone_->triangles()) tris.push_back({t[0], t[1], t[2]});
  return {{"schema", kMeshSchema}, {"name", config_.mesh}, {"vertices", verts}, {"triangles", tris}};
}

json TeleopService::config_json() const { return to_json(config_); }

std::vector<MetricsRecord> TeleopService::metrics() const {
  std::lock_guard lock(state_mutex_);
  return metrics_;
}

std::vector<TargetEvent> TeleopService::target_events() const {
  std::lock_guard lock(state_mutex_);
  return target_events_;
}

std::vector<double> TeleopService::tick_wall_times_ms() const {
  std::lock_guard lock(state_mutex_);
  return wall_ms_;
}

}  // namespace tdcr
