#include "tdcr/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <stdexcept>

namespace tdcr {
namespace {

using nlohmann::json;

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json shape_json(const RobotShape& s) {
  json a = json::array();
  for (const Vec3& p : s.points) {
    a.push_back(p.x());
    a.push_back(p.y());
    a.push_back(p.z());
  }
  return a;
}

}  // namespace

RunResult run_scenario(const ScenarioConfig& config) { return run_scenario(config, load_zone(config)); }

RunResult run_scenario(const ScenarioConfig& config, std::shared_ptr<const SafeZone> zone) {
  if (config.waypoints.empty()) throw InvalidInput("a scenario run needs at least one waypoint");
  RunResult run;
  run.config = config;
  ControlLoop loop(config, std::move(zone));
  for (const Waypoint& w : config.waypoints) run.waypoints.push_back({w, std::nullopt, std::nullopt});

  std::size_t wp = 0;
  int below = 0;
  const int ticks = config.ticks();
  run.records.reserve(static_cast<std::size_t>(ticks));
  for (int k = 0; k < ticks; ++k) {
    const Waypoint& w = config.waypoints[wp];
    if (config.shape_dump) run.shapes.emplace_back(loop.measured(), loop.nominal());
    MetricsRecord rec = loop.tick(w.position);
    rec.waypoint = static_cast<int>(wp);
    if (k == 0 && loop.faulted())
      throw std::runtime_error("MPC infeasible at t=0: the start state violates a constraint (" +
                               loop.fault_reason() + ")");
    if (config.shape_dump) run.shapes.back().second = loop.nominal();
    below = rec.e_ee_real < w.tolerance ? below + 1 : 0;
    const double t = rec.t;
    run.records.push_back(std::move(rec));
    if (below >= w.dwell && !run.waypoints[wp].reached_at) {
      run.waypoints[wp].reached_at = t;
      if (wp + 1 < config.waypoints.size()) {
        ++wp;
        below = 0;
      } else if (config.stop_when_done) {
        break;
      }
    }
  }
  run.summary = summarize(run);
  return run;
}

json summarize(const RunResult& run) {
  const auto& recs = run.records;
  const ScenarioConfig& c = run.config;
  json s;
  s["schema"] = "tdcr.summary/1";
  s["name"] = c.name;
  s["controller"] = to_string(c.controller);
  s["seed"] = c.disturbance.seed;
  s["rate_hz"] = c.rate_hz;
  s["ticks"] = recs.size();
  s["horizon"] = c.mpc.horizon;
  s["safe_margin"] = c.mpc.safe_margin;

  // Settling: first tick of a waypoint's segment after which the real EE
  // error stays below its tolerance until the segment ends.
  json wps = json::array();
  for (std::size_t w = 0; w < run.waypoints.size(); ++w) {
    auto first = std::find_if(recs.begin(), recs.end(), [&](const MetricsRecord& r) { return r.waypoint == static_cast<int>(w); });
    auto last = std::find_if(first, recs.end(), [&](const MetricsRecord& r) { return r.waypoint != static_cast<int>(w); });
    const double tol = run.waypoints[w].waypoint.tolerance;
    std::optional<double> settle;
    if (first != last) {
      auto it = last;
      while (it != first && std::prev(it)->e_ee_real < tol) --it;
      if (it != last) settle = it->t - first->t;
    }
    // Redraw transients make any instantaneous predicate a matter of luck, so
    // convergence speed uses the mean error over the following second.
    std::optional<double> converged;
    const auto window = static_cast<std::ptrdiff_t>(std::llround(c.rate_hz));
    for (auto it = first; last - it >= window; ++it) {
      double sum = 0.0;
      for (auto jt = it; jt != it + window; ++jt) sum += jt->e_ee_real;
      if (sum / static_cast<double>(window) < tol) {
        converged = it->t - first->t;
        break;
      }
    }
    const Vec3& p = run.waypoints[w].waypoint.position;
    wps.push_back({{"position", {p.x(), p.y(), p.z()}},
                   {"reached", run.waypoints[w].reached_at.has_value()},
                   {"reached_at", optional_json(run.waypoints[w].reached_at)},
                   {"settle_time", optional_json(settle)},
                   {"converged_after", optional_json(converged)}});
  }
  s["waypoints"] = wps;
  s["all_waypoints_reached"] =
      std::all_of(run.waypoints.begin(), run.waypoints.end(), [](const WaypointResult& w) { return w.reached_at.has_value(); });

  int nominal_violations = 0, real_margin_violations = 0, real_collisions = 0, faults = 0, scaled = 0, clamps = 0;
  double min_real = std::numeric_limits<double>::infinity();
  double min_meas = std::numeric_limits<double>::infinity();
  double min_nom = std::numeric_limits<double>::infinity();
  double max_coupling = 0.0;
  json status_counts = json::object();
  std::vector<double> times;
  for (const MetricsRecord& r : recs) {
    if (std::isfinite(r.min_margin_nom) && r.min_margin_nom < -c.mpc.tol_c) ++nominal_violations;
    if (r.min_margin_real < 0.0) ++real_margin_violations;
    if (r.min_dist_real < 0.0) ++real_collisions;
    if (r.status == "fault") ++faults;
    if (r.input_scaled) ++scaled;
    clamps += r.clamps;
    min_real = std::min(min_real, r.min_dist_real);
    min_meas = std::min(min_meas, r.min_dist_meas);
    if (!std::isnan(r.min_margin_nom)) min_nom = std::min(min_nom, r.min_margin_nom);
    max_coupling = std::max(max_coupling, r.coupling_nom);
    status_counts[r.status] = status_counts.value(r.status, 0) + 1;
    times.push_back(r.solve_time_ms);
  }
  s["nominal_violation_ticks"] = nominal_violations;
  s["real_margin_violation_ticks"] = real_margin_violations;
  s["real_collision_ticks"] = real_collisions;
  s["min_real_distance"] = finite_or_null(min_real);
  s["min_measured_distance"] = finite_or_null(min_meas);
  s["min_nominal_margin"] = finite_or_null(min_nom);
  s["max_overshoot_beyond_margin"] = std::isfinite(min_real) ? std::max(0.0, c.mpc.safe_margin - min_real) : 0.0;
  s["max_coupling_residual"] = max_coupling;
  s["fault_ticks"] = faults;
  s["dls_scaled_ticks"] = scaled;
  s["plant_clamp_events"] = clamps;
  s["status_counts"] = status_counts;

  // Steady-state statistics over the final 5 s (or the whole run if shorter).
  const std::size_t window = std::min(recs.size(), static_cast<std::size_t>(std::llround(5.0 * c.rate_hz)));
  double ee = 0.0, body = 0.0, ee_body = 0.0, body_clean = 0.0, nom = 0.0;
  for (std::size_t i = recs.size() - window; i < recs.size(); ++i) {
    ee += recs[i].e_ee_real;
    body += recs[i].e_body_local;
    ee_body += recs[i].e_ee_body;
    body_clean += recs[i].e_body_clean;
    nom += recs[i].e_ee_nom;
  }
  auto mean = [&](double sum) { return window ? finite_or_null(sum / static_cast<double>(window)) : json(nullptr); };
  s["steady_state_e_ee_real"] = mean(ee);
  s["steady_state_e_body_local"] = mean(body);
  s["steady_state_e_ee_body"] = mean(ee_body);
  s["steady_state_e_body_clean"] = mean(body_clean);
  s["steady_state_e_ee_nom"] = mean(nom);
  s["final_e_ee_real"] = recs.empty() ? json(nullptr) : json(recs.back().e_ee_real);

  const TimingStats ts = timing_stats(times);
  s["timing_ms"] = {{"mean", ts.mean_ms}, {"p95", ts.p95_ms}, {"max", ts.max_ms}};
  return s;
}

Comparison run_comparison(const ScenarioConfig& a, const ScenarioConfig& b) {
  if (a.disturbance.seed != b.disturbance.seed || a.mesh != b.mesh || a.rate_hz != b.rate_hz ||
      a.effective_disturbance().sigma_y != b.effective_disturbance().sigma_y)
    throw InvalidInput("comparison requires the same seed, rate, disturbances and safe zone");
  Comparison cmp;
  const std::shared_ptr<const SafeZone> zone = load_zone(a);
  cmp.a = run_scenario(a, zone);
  cmp.b = run_scenario(b, zone);
  json table = json::array();
  for (const char* key : {"all_waypoints_reached", "final_e_ee_real", "steady_state_e_ee_real", "min_real_distance",
                          "real_margin_violation_ticks", "real_collision_ticks", "nominal_violation_ticks",
                          "max_overshoot_beyond_margin", "plant_clamp_events", "dls_scaled_ticks"}) {
    table.push_back({{"metric", key}, {"a", cmp.a.summary[key]}, {"b", cmp.b.summary[key]}});
  }
  json settle = json::array();
  for (std::size_t w = 0; w < a.waypoints.size() && w < b.waypoints.size(); ++w) {
    json row = {{"waypoint", w}};
    for (const char* key : {"reached_at", "settle_time", "converged_after"})
      row[key] = {{"a", cmp.a.summary["waypoints"][w][key]}, {"b", cmp.b.summary["waypoints"][w][key]}};
    settle.push_back(row);
  }
  cmp.report = {{"schema", "tdcr.comparison/1"},
                {"a", {{"name", a.name}, {"controller", to_string(a.controller)}}},
                {"b", {{"name", b.name}, {"controller", to_string(b.controller)}}},
                {"seed", a.disturbance.seed},
                {"metrics", table},
                {"settle_time", settle}};
  return cmp;
}

TimingStats timing_stats(std::vector<double> samples) {
  TimingStats t;
  t.samples = static_cast<int>(samples.size());
  if (samples.empty()) return t;
  std::sort(samples.begin(), samples.end());
  t.mean_ms = std::accumulate(samples.begin(), samples.end(), 0.0) / static_cast<double>(samples.size());
  t.p95_ms = samples[static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(samples.size()))) - 1];
  t.max_ms = samples.back();
  return t;
}

TimingStats benchmark_solver(const ScenarioConfig& config, int repetitions) {
  if (repetitions < 1) throw InvalidInput("repetitions must be >= 1");
  const std::shared_ptr<const SafeZone> zone = load_zone(config);
  std::vector<double> samples;
  for (int r = 0; r < repetitions; ++r) {
    const RunResult run = run_scenario(config, zone);
    for (const MetricsRecord& rec : run.records) samples.push_back(rec.solve_time_ms);
  }
  return timing_stats(std::move(samples));
}

void write_metrics_csv(const std::vector<MetricsRecord>& records, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "tick,t,waypoint,target_x,target_y,target_z,e_ee_real,e_ee_nom,e_ee_local,e_body_local,"
         "u_mpc_norm,u_mpc_inf,u_local_norm,u_norm,u_inf,min_margin_real,min_dist_real,min_margin_nom,"
         "min_margin_pred,coupling_nom,min_dist_meas,e_ee_body,e_body_clean,status,iterations,active_constraints,clamps,input_scaled,target_changed";
  for (const char* prefix : {"u_", "u_mpc_", "u_local_"})
    for (int k = 0; k < kActuators; ++k) out << ',' << prefix << k;
  out << '\n';
  for (const MetricsRecord& r : records) {
    out << r.tick << ',' << fmt(r.t) << ',' << r.waypoint;
    for (int a = 0; a < 3; ++a) out << ',' << fmt(r.target[a]);
    for (double v : {r.e_ee_real, r.e_ee_nom, r.e_ee_local, r.e_body_local, r.u_mpc_norm, r.u_mpc_inf,
                     r.u_local_norm, r.u_norm, r.u_inf, r.min_margin_real, r.min_dist_real, r.min_margin_nom,
                     r.min_margin_pred, r.coupling_nom, r.min_dist_meas, r.e_ee_body, r.e_body_clean})
      out << ',' << fmt(v);
    out << ',' << r.status << ',' << r.iterations << ',' << r.active_constraints << ',' << r.clamps << ','
        << int(r.input_scaled) << ',' << int(r.target_changed);
    for (const ActuatorVector* v : {&r.u, &r.u_mpc, &r.u_local})
      for (int k = 0; k < kActuators; ++k) out << ',' << fmt((*v)[k]);
    out << '\n';
  }
}

void write_run(const RunResult& run, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_metrics_csv(run.records, dir / "metrics.csv");
  {
    std::ofstream out(dir / "timing.csv");
    out << "tick,solve_time_ms\n";
    for (const MetricsRecord& r : run.records) out << r.tick << ',' << fmt(r.solve_time_ms) << '\n';
  }
  {
    std::ofstream out(dir / "summary.json");
    json s = run.summary;
    s["config"] = to_json(run.config);
    out << s.dump(2) << '\n';
  }
  if (run.config.shape_dump) {
    std::ofstream out(dir / "shapes.jsonl");
    for (std::size_t k = 0; k < run.shapes.size(); ++k)
      out << json{{"tick", k}, {"measured", shape_json(run.shapes[k].first)}, {"nominal", shape_json(run.shapes[k].second)}}.dump()
          << '\n';
  }
}

}  // namespace tdcr
