#include <algorithm>

#include "tdcr/mesh.hpp"

namespace tdcr::mesh_primitives {
namespace {

// Appends quad (a, b, c, d), given in cyclic order, wound so that its normal
// agrees with `outward`.
void add_quad(TriangleMesh& mesh, int a, int b, int c, int d, const Vec3& outward) {
  const auto& V = mesh.vertices;
  if ((V[b] - V[a]).cross(V[c] - V[a]).dot(outward) >= 0.0) {
    mesh.triangles.push_back({a, b, c});
    mesh.triangles.push_back({a, c, d});
  } else {
    mesh.triangles.push_back({a, c, b});
    mesh.triangles.push_back({a, d, c});
  }
}

double cross2(const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
  return a.x() * b.y() - a.y() * b.x();
}

bool point_in_triangle(const Eigen::Vector2d& p, const Eigen::Vector2d& a,
                       const Eigen::Vector2d& b, const Eigen::Vector2d& c) {
  return cross2(b - a, p - a) >= 0.0 && cross2(c - b, p - b) >= 0.0 && cross2(a - c, p - c) >= 0.0;
}

// Ear clipping; polygon must be simple and counter-clockwise.
std::vector<Triangle> triangulate(const std::vector<Eigen::Vector2d>& poly) {
  std::vector<int> idx(poly.size());
  for (std::size_t i = 0; i < poly.size(); ++i) idx[i] = static_cast<int>(i);
  std::vector<Triangle> out;
  while (idx.size() > 3) {
    bool clipped = false;
    const std::size_t n = idx.size();
    for (std::size_t i = 0; i < n && !clipped; ++i) {
      const int a = idx[(i + n - 1) % n];
      const int b = idx[i];
      const int c = idx[(i + 1) % n];
      if (cross2(poly[b] - poly[a], poly[c] - poly[b]) <= 0.0) continue;  // reflex
      bool contains = false;
      for (int k : idx) {
        if (k == a || k == b || k == c) continue;
        if (point_in_triangle(poly[k], poly[a], poly[b], poly[c])) {
          contains = true;
          break;
        }
      }
      if (contains) continue;
      out.push_back({a, b, c});
      idx.erase(idx.begin() + static_cast<std::ptrdiff_t>(i));
      clipped = true;
    }
    if (!clipped) throw InvalidInput("polygon is not simple");
  }
  out.push_back({idx[0], idx[1], idx[2]});
  return out;
}

}  // namespace

TriangleMesh box(const Vec3& lo, const Vec3& hi) {
  TriangleMesh mesh;
  for (int i = 0; i < 8; ++i) {
    mesh.vertices.emplace_back((i & 1) ? hi.x() : lo.x(), (i & 2) ? hi.y() : lo.y(),
                               (i & 4) ? hi.z() : lo.z());
  }
  for (int axis = 0; axis < 3; ++axis) {
    const int u = 1 << ((axis + 1) % 3);
    const int v = 1 << ((axis + 2) % 3);
    for (int side = 0; side < 2; ++side) {
      const int base = side ? (1 << axis) : 0;
      Vec3 outward = Vec3::Zero();
      outward[axis] = side ? 1.0 : -1.0;
      add_quad(mesh, base, base + u, base + u + v, base + v, outward);
    }
  }
  return mesh;
}

TriangleMesh tube(const std::vector<Vec3>& centerline, double radius, int sides) {
  if (centerline.size() < 2) throw InvalidInput("tube centerline needs at least two points");
  if (sides < 3) throw InvalidInput("tube needs at least three sides");
  const std::size_t rings = centerline.size();

  std::vector<Vec3> segment_dir(rings - 1);
  for (std::size_t i = 0; i + 1 < rings; ++i)
    segment_dir[i] = (centerline[i + 1] - centerline[i]).normalized();

  std::vector<Vec3> tangent(rings);
  tangent.front() = segment_dir.front();
  tangent.back() = segment_dir.back();
  for (std::size_t i = 1; i + 1 < rings; ++i)
    tangent[i] = (segment_dir[i - 1] + segment_dir[i]).normalized();

  Vec3 u = tangent[0].unitOrthogonal();
  TriangleMesh mesh;
  for (std::size_t i = 0; i < rings; ++i) {
    if (i > 0) {
      u = Eigen::Quaterniond::FromTwoVectors(tangent[i - 1], tangent[i]) * u;
      u = (u - u.dot(tangent[i]) * tangent[i]).normalized();
    }
    const Vec3 v = tangent[i].cross(u);
    for (int k = 0; k < sides; ++k) {
      const double theta = 2.0 * std::numbers::pi * k / sides;
      mesh.vertices.push_back(centerline[i] + radius * (std::cos(theta) * u + std::sin(theta) * v));
    }
  }
  auto at = [&](std::size_t ring, int k) { return static_cast<int>(ring * sides + (k % sides)); };
  for (std::size_t i = 0; i + 1 < rings; ++i) {
    for (int k = 0; k < sides; ++k) {
      mesh.triangles.push_back({at(i, k), at(i, k + 1), at(i + 1, k + 1)});
      mesh.triangles.push_back({at(i, k), at(i + 1, k + 1), at(i + 1, k)});
    }
  }
  for (int k = 1; k + 1 < sides; ++k) {
    mesh.triangles.push_back({at(0, 0), at(0, k + 1), at(0, k)});
    mesh.triangles.push_back({at(rings - 1, 0), at(rings - 1, k), at(rings - 1, k + 1)});
  }
  return mesh;
}

TriangleMesh extruded_polygon(const std::vector<Eigen::Vector2d>& polygon_xz, double y_lo,
                              double y_hi) {
  if (polygon_xz.size() < 3) throw InvalidInput("polygon needs at least three vertices");
  std::vector<Eigen::Vector2d> poly = polygon_xz;
  double area = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) area += cross2(poly[i], poly[(i + 1) % poly.size()]);
  if (area < 0.0) std::reverse(poly.begin(), poly.end());

  const int n = static_cast<int>(poly.size());
  TriangleMesh mesh;
  for (double y : {y_lo, y_hi})
    for (const auto& p : poly) mesh.vertices.emplace_back(p.x(), y, p.y());

  // Counter-clockwise in (x, z) means the triangle normal points along -y.
  for (const Triangle& t : triangulate(poly)) {
    mesh.triangles.push_back({t[0], t[1], t[2]});
    mesh.triangles.push_back({n + t[0], n + t[2], n + t[1]});
  }
  for (int i = 0; i < n; ++i) {
    const int j = (i + 1) % n;
    const Eigen::Vector2d d = poly[j] - poly[i];
    add_quad(mesh, i, j, n + j, n + i, Vec3(d.y(), 0.0, -d.x()));
  }
  return mesh;
}

}  // namespace tdcr::mesh_primitives

namespace tdcr::mesh_primitives {

TriangleMesh unit_cube() { return box(Vec3::Constant(-0.5), Vec3::Constant(0.5)); }

TriangleMesh winding_tube() {
  // Vertical run, then two opposite arcs of radius 140 mm in the x-z plane.
  constexpr double kBendRadius = 140.0;
  constexpr double kArc = 50.0 * std::numbers::pi / 180.0;
  constexpr int kArcRings = 15;
  std::vector<Vec3> line;
  line.emplace_back(0.0, 0.0, -30.0);
  const Vec3 start(0.0, 0.0, 110.0);
  line.push_back(start);
  const Vec3 c1 = start + Vec3(kBendRadius, 0.0, 0.0);
  for (int i = 1; i <= kArcRings; ++i) {
    const double t = kArc * i / kArcRings;
    line.push_back(c1 + kBendRadius * Vec3(-std::cos(t), 0.0, std::sin(t)));
  }
  const Vec3 mid = line.back();
  const Vec3 c2 = mid + (mid - c1);
  for (int i = 1; i <= kArcRings; ++i) {
    const double t = kArc * (1.0 - static_cast<double>(i) / kArcRings);
    line.push_back(c2 + kBendRadius * Vec3(std::cos(t), 0.0, -std::sin(t)));
  }
  const Vec3 end = line.back();
  const Vec3 dir = (end - line[line.size() - 2]).normalized();
  for (int i = 1; i <= 3; ++i) line.push_back(end + 15.0 * i * dir);
  return tube(line, 22.0, 10);
}

TriangleMesh inverted_u() {
  const std::vector<Eigen::Vector2d> outline = {{-25, -30}, {25, -30}, {25, 130}, {75, 130},
                                                {75, 40},   {125, 40}, {125, 200}, {-25, 200}};
  return extruded_polygon(outline, -25.0, 25.0);
}

TriangleMesh halfspace_box() { return box(Vec3(-150, -150, -30), Vec3(40, 150, 320)); }

}  // namespace tdcr::mesh_primitives
