#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "tdcr/mesh.hpp"

namespace tdcr::mesh_io {
namespace {

std::string lower_extension(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  for (char& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return ext;
}

int parse_obj_index(const std::string& token, int vertex_count) {
  const std::string head = token.substr(0, token.find('/'));
  int idx = 0;
  try {
    idx = std::stoi(head);
  } catch (const std::exception&) {
    throw IoError("malformed OBJ face index '" + token + "'");
  }
  if (idx < 0) idx = vertex_count + idx + 1;
  return idx - 1;
}

struct CellHash {
  std::size_t operator()(const std::array<std::int64_t, 3>& c) const {
    std::size_t h = 1469598103934665603ull;
    for (std::int64_t v : c) h = (h ^ static_cast<std::size_t>(v)) * 1099511628211ull;
    return h;
  }
};

}  // namespace

TriangleMesh read_obj(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open mesh file " + path.string());
  TriangleMesh mesh;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ss(line);
    std::string tag;
    if (!(ss >> tag) || tag[0] == '#') continue;
    if (tag == "v") {
      Vec3 v;
      if (!(ss >> v.x() >> v.y() >> v.z()))
        throw IoError(path.string() + ":" + std::to_string(line_no) + ": malformed vertex");
      mesh.vertices.push_back(v);
    } else if (tag == "f") {
      std::vector<int> idx;
      std::string tok;
      while (ss >> tok) idx.push_back(parse_obj_index(tok, static_cast<int>(mesh.vertices.size())));
      if (idx.size() != 3)
        throw MeshInvalid(path.string() + ":" + std::to_string(line_no) +
                          ": only triangular faces are supported");
      mesh.triangles.push_back({idx[0], idx[1], idx[2]});
    }
  }
  return mesh;
}

TriangleMesh read_stl(const std::filesystem::path& path, double weld_tolerance) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open mesh file " + path.string());
  char header[80];
  std::uint32_t count = 0;
  if (!in.read(header, sizeof header) || !in.read(reinterpret_cast<char*>(&count), 4))
    throw IoError("truncated STL header in " + path.string());

  TriangleMesh mesh;
  std::unordered_map<std::array<std::int64_t, 3>, std::vector<int>, CellHash> grid;
  auto cell_of = [&](const Vec3& p) {
    return std::array<std::int64_t, 3>{std::llround(std::floor(p.x() / weld_tolerance)),
                                       std::llround(std::floor(p.y() / weld_tolerance)),
                                       std::llround(std::floor(p.z() / weld_tolerance))};
  };
  auto weld = [&](const Vec3& p) {
    const auto cell = cell_of(p);
    for (std::int64_t dx = -1; dx <= 1; ++dx)
      for (std::int64_t dy = -1; dy <= 1; ++dy)
        for (std::int64_t dz = -1; dz <= 1; ++dz) {
          auto it = grid.find({cell[0] + dx, cell[1] + dy, cell[2] + dz});
          if (it == grid.end()) continue;
          for (int v : it->second)
            if ((mesh.vertices[v] - p).norm() <= weld_tolerance) return v;
        }
    const int id = static_cast<int>(mesh.vertices.size());
    mesh.vertices.push_back(p);
    grid[cell].push_back(id);
    return id;
  };

  mesh.triangles.reserve(count);
  for (std::uint32_t t = 0; t < count; ++t) {
    char record[50];
    if (!in.read(record, sizeof record)) throw IoError("truncated STL body in " + path.string());
    float f[12];
    std::memcpy(f, record, sizeof f);
    Triangle tri;
    for (int k = 0; k < 3; ++k) tri[k] = weld(Vec3(f[3 + 3 * k], f[4 + 3 * k], f[5 + 3 * k]));
    mesh.triangles.push_back(tri);
  }
  return mesh;
}

void write_obj(const TriangleMesh& mesh, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out.precision(17);
  for (const Vec3& v : mesh.vertices) out << "v " << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
  for (const Triangle& t : mesh.triangles)
    out << "f " << t[0] + 1 << ' ' << t[1] + 1 << ' ' << t[2] + 1 << '\n';
}

void write_stl(const TriangleMesh& mesh, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  char header[80] = {};
  std::strncpy(header, "tdcr binary stl", sizeof header - 1);
  out.write(header, sizeof header);
  const auto count = static_cast<std::uint32_t>(mesh.triangles.size());
  out.write(reinterpret_cast<const char*>(&count), 4);
  for (const Triangle& t : mesh.triangles) {
    const Vec3& a = mesh.vertices[t[0]];
    const Vec3& b = mesh.vertices[t[1]];
    const Vec3& c = mesh.vertices[t[2]];
    const Vec3 n = (b - a).cross(c - a).normalized();
    float f[12] = {float(n.x()), float(n.y()), float(n.z()), float(a.x()), float(a.y()),
                   float(a.z()), float(b.x()), float(b.y()), float(b.z()), float(c.x()),
                   float(c.y()), float(c.z())};
    char record[50] = {};
    std::memcpy(record, f, sizeof f);
    out.write(record, sizeof record);
  }
}

SafeZone load_mesh(const std::filesystem::path& path) {
  const std::string ext = lower_extension(path);
  if (ext == ".obj") return SafeZone(read_obj(path));
  if (ext == ".stl") return SafeZone(read_stl(path));
  throw IoError("unsupported mesh format '" + ext + "' (expected .obj or .stl)");
}

}  // namespace tdcr::mesh_io
