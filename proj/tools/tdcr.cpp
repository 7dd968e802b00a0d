// Command-line front end: run, compare and benchmark scenarios, serve the
// teleoperation API, regenerate the shipped meshes.

#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <thread>

#include "CLI11.hpp"
#include "tdcr/harness.hpp"
#include "tdcr/teleop.hpp"

namespace fs = std::filesystem;
using namespace tdcr;

namespace {

std::atomic<bool> g_interrupted{false};

struct Common {
  std::vector<std::string> configs;
  std::optional<std::uint64_t> seed;
  std::optional<double> rate;
  std::string controller;
  std::string out = "out";
};

void add_common(CLI::App* cmd, Common& c, bool multi_config) {
  if (multi_config)
    cmd->add_option("--config", c.configs, "Scenario JSON (give twice to compare two configs)")
        ->required()
        ->expected(1, 2)
        ->check(CLI::ExistingFile);
  else
    cmd->add_option("--config", c.configs, "Scenario JSON")->required()->expected(1)->check(CLI::ExistingFile);
  cmd->add_option("--seed", c.seed, "Disturbance seed");
  cmd->add_option("--rate", c.rate, "Control rate in Hz")->check(CLI::PositiveNumber);
  cmd->add_option("--controller", c.controller, "mpc or dls")->check(CLI::IsMember({"mpc", "dls"}));
  cmd->add_option("--out", c.out, "Output directory");
}

ScenarioConfig load(const std::string& path, const Common& c) {
  ScenarioConfig cfg = load_config(path);
  if (c.seed) cfg.set_seed(*c.seed);
  if (c.rate) cfg.set_rate(*c.rate);
  if (!c.controller.empty()) cfg.controller = controller_from_string(c.controller);
  cfg.validate();
  return cfg;
}

void write_json(const nlohmann::json& j, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

int cmd_run(const Common& c) {
  const ScenarioConfig cfg = load(c.configs.front(), c);
  const RunResult run = run_scenario(cfg);
  write_run(run, c.out);
  std::cout << run.summary.dump(2) << '\n';
  return 0;
}

int cmd_compare(const Common& c) {
  ScenarioConfig a = load(c.configs.front(), c);
  ScenarioConfig b = c.configs.size() > 1 ? load(c.configs[1], c) : a;
  if (c.configs.size() == 1) {
    a.controller = ControllerKind::kMpc;
    b.controller = ControllerKind::kDls;
  }
  const Comparison cmp = run_comparison(a, b);
  const fs::path out = c.out;
  write_run(cmp.a, out / "a");
  write_run(cmp.b, out / "b");
  write_json(cmp.report, out / "comparison.json");
  std::cout << cmp.report.dump(2) << '\n';
  return 0;
}

int cmd_bench(const Common& c, int repetitions, std::optional<int> horizon) {
  ScenarioConfig cfg = load(c.configs.front(), c);
  if (horizon) cfg.mpc.horizon = *horizon;
  cfg.validate();
  const TimingStats st = benchmark_solver(cfg, repetitions);
  const double budget_ms = 1000.0 / cfg.rate_hz;
  const nlohmann::json report = {{"schema", "tdcr.bench/1"},
                                 {"controller", to_string(cfg.controller)},
                                 {"horizon", cfg.mpc.horizon},
                                 {"rate_hz", cfg.rate_hz},
                                 {"repetitions", repetitions},
                                 {"samples", st.samples},
                                 {"mean_ms", st.mean_ms},
                                 {"p95_ms", st.p95_ms},
                                 {"max_ms", st.max_ms},
                                 {"budget_ms", budget_ms},
                                 {"within_budget", st.max_ms < budget_ms}};
  fs::create_directories(c.out);
  write_json(report, fs::path(c.out) / "bench.json");
  std::cout << report.dump(2) << '\n';
  return 0;
}

int cmd_serve(const Common& c, const TeleopOptions& opts) {
  const ScenarioConfig cfg = load(c.configs.front(), c);
  TeleopService service(cfg, load_zone(cfg), opts);
  service.start();
  std::cerr << "serving on http://" << opts.host << ':' << service.port() << "/api/v1\n";
  std::signal(SIGINT, [](int) { g_interrupted = true; });
  std::signal(SIGTERM, [](int) { g_interrupted = true; });
  while (!g_interrupted) std::this_thread::sleep_for(std::chrono::milliseconds(100));
  service.stop();
  fs::create_directories(c.out);
  write_metrics_csv(service.metrics(), fs::path(c.out) / "metrics.csv");
  std::ofstream ev(fs::path(c.out) / "targets.csv");
  ev << "arrival_tick,x,y,z\n";
  for (const TargetEvent& e : service.target_events())
    ev << e.arrival_tick << ',' << e.target.x() << ',' << e.target.y() << ',' << e.target.z() << '\n';
  return 0;
}

int cmd_meshgen(const std::string& out) {
  fs::create_directories(out);
  for (const char* name : {"unit_cube", "winding_tube", "inverted_u", "halfspace_box"}) {
    const fs::path path = fs::path(out) / (std::string(name) + ".obj");
    mesh_io::write_obj(builtin_mesh(name), path);
    std::cout << path.string() << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tendon-driven continuum robot control experiments"};
  app.require_subcommand(1);

  Common run_opts, cmp_opts, bench_opts, serve_opts;
  auto* run = app.add_subcommand("run", "Run one closed-loop scenario");
  add_common(run, run_opts, false);

  auto* compare = app.add_subcommand("compare", "Run two controllers under identical conditions");
  add_common(compare, cmp_opts, true);

  auto* bench = app.add_subcommand("bench", "Measure controller computation time");
  add_common(bench, bench_opts, false);
  int repetitions = 3;
  std::optional<int> horizon;
  bench->add_option("--repetitions", repetitions, "Full runs to time")->check(CLI::PositiveNumber);
  bench->add_option("--horizon", horizon, "Override the MPC horizon")->check(CLI::PositiveNumber);

  auto* serve = app.add_subcommand("serve", "Serve the teleoperation API");
  add_common(serve, serve_opts, false);
  TeleopOptions topts;
  serve->add_option("--host", topts.host, "Bind address");
  serve->add_option("--port", topts.port, "TCP port (0 picks one)");
  serve->add_option("--speed", topts.speed, "Simulated seconds per wall second")->check(CLI::PositiveNumber);
  serve->add_flag("--paused", topts.start_paused, "Start paused");

  auto* meshgen = app.add_subcommand("meshgen", "Write the built-in safe zones as OBJ files");
  std::string mesh_out = "data/meshes";
  meshgen->add_option("--out", mesh_out, "Output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(run_opts);
    if (compare->parsed()) return cmd_compare(cmp_opts);
    if (bench->parsed()) return cmd_bench(bench_opts, repetitions, horizon);
    if (serve->parsed()) return cmd_serve(serve_opts, topts);
    if (meshgen->parsed()) return cmd_meshgen(mesh_out);
  } catch (const InvalidInput& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 4;
  }
  return 1;
}
