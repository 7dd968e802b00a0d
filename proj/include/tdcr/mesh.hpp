#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Geometry>

#include "tdcr/types.hpp"

namespace tdcr {

class MeshInvalid : public std::runtime_error {
 public:
  MeshInvalid(const std::string& what, std::vector<std::pair<int, int>> edges = {})
      : std::runtime_error(what), edges_(std::move(edges)) {}

  /// Directed edges (vertex index pairs) that lack a matching opposite half-edge.
  const std::vector<std::pair<int, int>>& edges() const { return edges_; }

 private:
  std::vector<std::pair<int, int>> edges_;
};

using Triangle = std::array<int, 3>;

/// Plain indexed triangle soup, as read from or written to disk.
struct TriangleMesh {
  std::vector<Vec3> vertices;
  std::vector<Triangle> triangles;
};

struct SdfResult {
  double distance = 0.0;  // positive inside
  Vec3 closest_point = Vec3::Zero();
  Vec3 gradient = Vec3::Zero();  // unit, direction of increasing distance
};

/// Watertight, consistently oriented triangle mesh with inside-positive
/// signed distance queries. Signs come from angle-weighted pseudonormals at
/// the closest feature; the nearest triangle is found through an AABB tree.
/// Immutable after construction, so concurrent queries are safe.
class SafeZone {
 public:
  /// Validates the mesh (throws MeshInvalid) and builds the BVH.
  explicit SafeZone(TriangleMesh mesh);

  const std::vector<Vec3>& vertices() const { return mesh_.vertices; }
  const std::vector<Triangle>& triangles() const { return mesh_.triangles; }
  const TriangleMesh& mesh() const { return mesh_; }

  SdfResult query(const Vec3& p) const;
  double signed_distance(const Vec3& p) const { return query(p).distance; }
  Vec3 gradient(const Vec3& p) const { return query(p).gradient; }

  /// Same result as query() but visits every triangle; used to cross-check the BVH.
  SdfResult query_brute_force(const Vec3& p) const;

  Eigen::AlignedBox3d bounds() const;

 private:
  enum class Feature : std::uint8_t { kFace, kEdge0, kEdge1, kEdge2, kVertex0, kVertex1, kVertex2 };

  struct Candidate {
    double dist2 = std::numeric_limits<double>::infinity();
    Vec3 point = Vec3::Zero();
    int triangle = -1;
    Feature feature = Feature::kFace;
  };

  struct Node {
    Eigen::AlignedBox3d box;
    int left = -1;  // child indices, -1 for leaves
    int right = -1;
    int begin = 0;  // range into order_ for leaves
    int end = 0;
  };

  void validate() const;
  void compute_pseudonormals();
  int build(int begin, int end);
  void visit_triangle(int t, const Vec3& p, Candidate& best) const;
  SdfResult finish(const Vec3& p, const Candidate& best) const;
  const Vec3& feature_normal(int t, Feature f) const;

  TriangleMesh mesh_;
  std::vector<Vec3> face_normals_;
  std::vector<Vec3> vertex_normals_;
  std::vector<std::array<Vec3, 3>> edge_normals_;  // per triangle, edge (k, k+1)
  std::vector<Node> nodes_;
  std::vector<int> order_;
};

namespace mesh_io {

/// Loads ASCII OBJ (triangles only) or binary STL, chosen by file extension.
SafeZone load_mesh(const std::filesystem::path& path);

TriangleMesh read_obj(const std::filesystem::path& path);
/// Binary STL; coincident vertices within `weld_tolerance` mm are merged.
TriangleMesh read_stl(const std::filesystem::path& path, double weld_tolerance = 1e-6);

void write_obj(const TriangleMesh& mesh, const std::filesystem::path& path);
void write_stl(const TriangleMesh& mesh, const std::filesystem::path& path);

}  // namespace mesh_io

namespace mesh_primitives {

/// Axis-aligned box with outward-facing triangles.
TriangleMesh box(const Vec3& lo, const Vec3& hi);

/// Tube swept along a polyline centerline with circular cross-sections and
/// flat caps. Frames are propagated by parallel transport.
TriangleMesh tube(const std::vector<Vec3>& centerline, double radius, int sides);

/// Simple polygon in the x-z plane (counter-clockwise seen from -y), extruded
/// over y in [y_lo, y_hi].
TriangleMesh extruded_polygon(const std::vector<Eigen::Vector2d>& polygon_xz, double y_lo,
                              double y_hi);

/// The safe zones shipped under data/meshes, regenerated by `tdcr meshgen`.
TriangleMesh unit_cube();
/// Vertical channel that bends into an S-curve; 350 vertices.
TriangleMesh winding_tube();
/// Two vertical channels joined by a bridge at the top.
TriangleMesh inverted_u();
/// Large box whose +x face is a flat wall 40 mm from the robot axis.
TriangleMesh halfspace_box();

}  // namespace mesh_primitives
}  // namespace tdcr
