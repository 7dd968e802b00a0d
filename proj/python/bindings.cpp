#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "tdcr/harness.hpp"

namespace py = pybind11;
using namespace tdcr;

namespace {

Eigen::MatrixX3d shape_matrix(const RobotShape& s) {
  Eigen::MatrixX3d m(static_cast<Eigen::Index>(s.size()), 3);
  for (std::size_t i = 0; i < s.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = s.points[i].transpose();
  return m;
}

ActuatorState state_from(const Eigen::VectorXd& v) {
  if (v.size() != kActuators) throw InvalidInput("actuator vector must have 12 entries");
  return ActuatorState(ActuatorVector(v));
}

ScenarioConfig config_from_text(const std::string& text, const std::string& base_dir) {
  return config_from_json(nlohmann::json::parse(text), base_dir);
}

// Per-tick numeric columns as a dict of lists.
py::dict metrics_columns(const std::vector<MetricsRecord>& recs) {
  std::vector<double> t, e_real, e_nom, e_local, e_body, margin_real, dist_real, margin_nom, u_norm;
  std::vector<std::int64_t> tick;
  std::vector<std::string> status;
  for (const MetricsRecord& r : recs) {
    tick.push_back(r.tick);
    t.push_back(r.t);
    e_real.push_back(r.e_ee_real);
    e_nom.push_back(r.e_ee_nom);
    e_local.push_back(r.e_ee_local);
    e_body.push_back(r.e_body_local);
    margin_real.push_back(r.min_margin_real);
    dist_real.push_back(r.min_dist_real);
    margin_nom.push_back(r.min_margin_nom);
    u_norm.push_back(r.u_norm);
    status.push_back(r.status);
  }
  py::dict d;
  d["tick"] = tick;
  d["t"] = t;
  d["e_ee_real"] = e_real;
  d["e_ee_nom"] = e_nom;
  d["e_ee_local"] = e_local;
  d["e_body_local"] = e_body;
  d["min_margin_real"] = margin_real;
  d["min_dist_real"] = dist_real;
  d["min_margin_nom"] = margin_nom;
  d["u_norm"] = u_norm;
  d["status"] = status;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Tendon-driven continuum robot kinematics, safe-zone SDF and closed-loop simulation";

  py::register_exception<InvalidInput>(m, "InvalidInput", PyExc_ValueError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);

  m.attr("ACTUATORS") = kActuators;
  m.attr("SEGMENTS") = kSegments;

  m.def("straight_state", [] { return Eigen::VectorXd(centered_straight_state(RobotGeometry{}).x); },
        "Tendon-consistent straight configuration with centred segment lengths.");
  m.def(
      "forward_kinematics",
      [](const Eigen::VectorXd& x) { return shape_matrix(kinematics::forward_kinematics(state_from(x), RobotGeometry{})); },
      py::arg("x"), "Disk positions (3n x 3, mm) for a 12-entry actuator vector.");
  m.def(
      "tip_position", [](const Eigen::VectorXd& x) { return Vec3(kinematics::tip_position(state_from(x), RobotGeometry{})); },
      py::arg("x"));
  m.def(
      "disk_jacobians",
      [](const Eigen::VectorXd& x) {
        std::vector<Eigen::MatrixXd> out;
        for (const Jacobian& J : kinematics::disk_jacobians(state_from(x), RobotGeometry{})) out.emplace_back(J);
        return out;
      },
      py::arg("x"));
  m.def(
      "arcs_to_actuators",
      [](const std::vector<std::array<double, 3>>& arcs) {
        if (arcs.size() != static_cast<std::size_t>(kSegments)) throw InvalidInput("one (curvature, bend_plane, length) per segment");
        ArcParameters a;
        for (int j = 0; j < kSegments; ++j) a[j] = {arcs[j][0], arcs[j][1], arcs[j][2]};
        return Eigen::VectorXd(kinematics::arcs_to_actuators(a, RobotGeometry{}).x);
      },
      py::arg("arcs"));

  py::class_<SafeZone, std::shared_ptr<SafeZone>>(m, "SafeZone")
      .def_static("load", [](const std::string& path) { return std::make_shared<SafeZone>(mesh_io::load_mesh(path)); })
      .def_static("builtin", [](const std::string& name) { return std::make_shared<SafeZone>(builtin_mesh(name)); })
      .def("signed_distance", &SafeZone::signed_distance, py::arg("p"))
      .def("gradient", &SafeZone::gradient, py::arg("p"))
      .def_property_readonly("vertex_count", [](const SafeZone& z) { return z.vertices().size(); })
      .def_property_readonly("triangle_count", [](const SafeZone& z) { return z.triangles().size(); });

  m.def(
      "normalize_config",
      [](const std::string& text, const std::string& base_dir) {
        return to_json(config_from_text(text, base_dir)).dump();
      },
      py::arg("config_json"), py::arg("base_dir") = ".", "Parses, validates and re-serializes a scenario config.");

  m.def(
      "run",
      [](const std::string& text, const std::string& base_dir, std::optional<std::uint64_t> seed,
         std::optional<std::string> controller, std::optional<double> rate_hz) {
        ScenarioConfig c = config_from_text(text, base_dir);
        if (seed) c.set_seed(*seed);
        if (controller) c.controller = controller_from_string(*controller);
        if (rate_hz) c.set_rate(*rate_hz);
        RunResult r;
        {
          py::gil_scoped_release release;
          r = run_scenario(c);
        }
        return py::make_tuple(r.summary.dump(), metrics_columns(r.records));
      },
      py::arg("config_json"), py::arg("base_dir") = ".", py::arg("seed") = py::none(),
      py::arg("controller") = py::none(), py::arg("rate_hz") = py::none(),
      "Runs a scenario; returns (summary JSON text, per-tick metric columns).");

  m.def(
      "write_run",
      [](const std::string& text, const std::string& base_dir, const std::string& out_dir) {
        const ScenarioConfig c = config_from_text(text, base_dir);
        py::gil_scoped_release release;
        std::filesystem::create_directories(out_dir);
        write_run(run_scenario(c), out_dir);
      },
      py::arg("config_json"), py::arg("base_dir"), py::arg("out_dir"));
}
