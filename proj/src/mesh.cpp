#include "tdcr/mesh.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <sstream>

namespace tdcr {
namespace {

constexpr int kLeafSize = 4;

bool lex_less(const Vec3& a, const Vec3& b) {
  if (a.x() != b.x()) return a.x() < b.x();
  if (a.y() != b.y()) return a.y() < b.y();
  return a.z() < b.z();
}

double corner_angle(const Vec3& at, const Vec3& u, const Vec3& v) {
  const Vec3 a = (u - at).normalized();
  const Vec3 b = (v - at).normalized();
  return std::atan2(a.cross(b).norm(), a.dot(b));
}

}  // namespace

SafeZone::SafeZone(TriangleMesh mesh) : mesh_(std::move(mesh)) {
  validate();
  compute_pseudonormals();
  order_.resize(mesh_.triangles.size());
  std::iota(order_.begin(), order_.end(), 0);
  nodes_.reserve(2 * order_.size() / kLeafSize + 2);
  build(0, static_cast<int>(order_.size()));
}

void SafeZone::validate() const {
  if (mesh_.triangles.empty()) throw MeshInvalid("mesh has no triangles");
  const int nv = static_cast<int>(mesh_.vertices.size());
  std::map<std::pair<int, int>, int> half_edges;
  for (std::size_t t = 0; t < mesh_.triangles.size(); ++t) {
    const Triangle& tri = mesh_.triangles[t];
    for (int k = 0; k < 3; ++k) {
      if (tri[k] < 0 || tri[k] >= nv) throw MeshInvalid("triangle references a missing vertex");
    }
    if (tri[0] == tri[1] || tri[1] == tri[2] || tri[2] == tri[0])
      throw MeshInvalid("degenerate triangle " + std::to_string(t));
    const Vec3 n = (mesh_.vertices[tri[1]] - mesh_.vertices[tri[0]])
                       .cross(mesh_.vertices[tri[2]] - mesh_.vertices[tri[0]]);
    if (!(n.norm() > 0.0)) throw MeshInvalid("zero-area triangle " + std::to_string(t));
    for (int k = 0; k < 3; ++k) ++half_edges[{tri[k], tri[(k + 1) % 3]}];
  }
  std::vector<std::pair<int, int>> bad;
  for (const auto& [edge, count] : half_edges) {
    auto twin = half_edges.find({edge.second, edge.first});
    if (count != 1 || twin == half_edges.end() || twin->second != 1) bad.push_back(edge);
  }
  if (!bad.empty()) {
    std::ostringstream msg;
    msg << "mesh is not watertight or inconsistently wound (" << bad.size()
        << " offending half-edges)";
    throw MeshInvalid(msg.str(), std::move(bad));
  }
}

void SafeZone::compute_pseudonormals() {
  const auto& V = mesh_.vertices;
  const std::size_t nt = mesh_.triangles.size();
  face_normals_.resize(nt);
  vertex_normals_.assign(V.size(), Vec3::Zero());
  std::map<std::pair<int, int>, Vec3> edge_sum;

  for (std::size_t t = 0; t < nt; ++t) {
    const Triangle& tri = mesh_.triangles[t];
    const Vec3 n = (V[tri[1]] - V[tri[0]]).cross(V[tri[2]] - V[tri[0]]).normalized();
    face_normals_[t] = n;
    for (int k = 0; k < 3; ++k) {
      const int a = tri[k];
      const int b = tri[(k + 1) % 3];
      const int c = tri[(k + 2) % 3];
      vertex_normals_[a] += corner_angle(V[a], V[b], V[c]) * n;
      // Eigen vectors are not zero-initialized by operator[].
      edge_sum.try_emplace({std::min(a, b), std::max(a, b)}, Vec3::Zero()).first->second += n;
    }
  }
  for (Vec3& n : vertex_normals_) n.normalize();

  edge_normals_.resize(nt);
  for (std::size_t t = 0; t < nt; ++t) {
    const Triangle& tri = mesh_.triangles[t];
    for (int k = 0; k < 3; ++k) {
      const int a = tri[k];
      const int b = tri[(k + 1) % 3];
      edge_normals_[t][k] = edge_sum[{std::min(a, b), std::max(a, b)}].normalized();
    }
  }
}

int SafeZone::build(int begin, int end) {
  const int index = static_cast<int>(nodes_.size());
  nodes_.emplace_back();
  Eigen::AlignedBox3d box;
  Eigen::AlignedBox3d centroids;
  for (int i = begin; i < end; ++i) {
    const Triangle& tri = mesh_.triangles[order_[i]];
    Vec3 c = Vec3::Zero();
    for (int k = 0; k < 3; ++k) {
      box.extend(mesh_.vertices[tri[k]]);
      c += mesh_.vertices[tri[k]];
    }
    centroids.extend(c / 3.0);
  }
  nodes_[index].box = box;

  if (end - begin <= kLeafSize) {
    nodes_[index].begin = begin;
    nodes_[index].end = end;
    return index;
  }

  int axis = 0;
  centroids.sizes().maxCoeff(&axis);
  const int mid = (begin + end) / 2;
  auto centroid = [&](int t) {
    const Triangle& tri = mesh_.triangles[t];
    return mesh_.vertices[tri[0]][axis] + mesh_.vertices[tri[1]][axis] +
           mesh_.vertices[tri[2]][axis];
  };
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](int a, int b) {
                     const double ca = centroid(a);
                     const double cb = centroid(b);
                     return ca != cb ? ca < cb : a < b;
                   });
  const int left = build(begin, mid);
  const int right = build(mid, end);
  nodes_[index].left = left;
  nodes_[index].right = right;
  return index;
}

// Closest point on a triangle with identification of the Voronoi feature
// (vertex, edge or face interior) it lies on.
void SafeZone::visit_triangle(int t, const Vec3& p, Candidate& best) const {
  const Triangle& tri = mesh_.triangles[t];
  const Vec3& a = mesh_.vertices[tri[0]];
  const Vec3& b = mesh_.vertices[tri[1]];
  const Vec3& c = mesh_.vertices[tri[2]];

  Vec3 q;
  Feature f;
  const Vec3 ab = b - a;
  const Vec3 ac = c - a;
  const Vec3 ap = p - a;
  const double d1 = ab.dot(ap);
  const double d2 = ac.dot(ap);
  const Vec3 bp = p - b;
  const double d3 = ab.dot(bp);
  const double d4 = ac.dot(bp);
  const Vec3 cp = p - c;
  const double d5 = ab.dot(cp);
  const double d6 = ac.dot(cp);
  const double vc = d1 * d4 - d3 * d2;
  const double vb = d5 * d2 - d1 * d6;
  const double va = d3 * d6 - d5 * d4;

  if (d1 <= 0.0 && d2 <= 0.0) {
    q = a;
    f = Feature::kVertex0;
  } else if (d3 >= 0.0 && d4 <= d3) {
    q = b;
    f = Feature::kVertex1;
  } else if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) {
    q = a + (d1 / (d1 - d3)) * ab;
    f = Feature::kEdge0;
  } else if (d6 >= 0.0 && d5 <= d6) {
    q = c;
    f = Feature::kVertex2;
  } else if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) {
    q = a + (d2 / (d2 - d6)) * ac;
    f = Feature::kEdge2;
  } else if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
    q = b + ((d4 - d3) / ((d4 - d3) + (d5 - d6))) * (c - b);
    f = Feature::kEdge1;
  } else {
    const double denom = 1.0 / (va + vb + vc);
    q = a + ab * (vb * denom) + ac * (vc * denom);
    f = Feature::kFace;
  }

  const double dist2 = (p - q).squaredNorm();
  bool better = dist2 < best.dist2;
  if (dist2 == best.dist2) {
    better = lex_less(q, best.point) || (q == best.point && t < best.triangle);
  }
  if (better) {
    best.dist2 = dist2;
    best.point = q;
    best.triangle = t;
    best.feature = f;
  }
}

const Vec3& SafeZone::feature_normal(int t, Feature f) const {
  const Triangle& tri = mesh_.triangles[t];
  switch (f) {
    case Feature::kFace: return face_normals_[t];
    case Feature::kEdge0: return edge_normals_[t][0];
    case Feature::kEdge1: return edge_normals_[t][1];
    case Feature::kEdge2: return edge_normals_[t][2];
    case Feature::kVertex0: return vertex_normals_[tri[0]];
    case Feature::kVertex1: return vertex_normals_[tri[1]];
    case Feature::kVertex2: return vertex_normals_[tri[2]];
  }
  return face_normals_[t];
}

SdfResult SafeZone::finish(const Vec3& p, const Candidate& best) const {
  SdfResult r;
  r.closest_point = best.point;
  const Vec3 normal = feature_normal(best.triangle, best.feature);
  const Vec3 offset = p - best.point;
  const double dist = std::sqrt(best.dist2);
  const bool outside = offset.dot(normal) > 0.0;
  r.distance = outside ? -dist : dist;
  if (dist < 1e-9) {
    r.gradient = -normal;
  } else {
    r.gradient = (outside ? -offset : offset) / dist;
  }
  return r;
}

SdfResult SafeZone::query(const Vec3& p) const {
  Candidate best;
  int stack[64];
  int top = 0;
  stack[top++] = 0;
  while (top > 0) {
    const Node& node = nodes_[stack[--top]];
    if (node.box.squaredExteriorDistance(p) > best.dist2) continue;
    if (node.left < 0) {
      for (int i = node.begin; i < node.end; ++i) visit_triangle(order_[i], p, best);
      continue;
    }
    const double dl = nodes_[node.left].box.squaredExteriorDistance(p);
    const double dr = nodes_[node.right].box.squaredExteriorDistance(p);
    // Push the farther child first so the nearer one is popped next.
    if (dl <= dr) {
      stack[top++] = node.right;
      stack[top++] = node.left;
    } else {
      stack[top++] = node.left;
      stack[top++] = node.right;
    }
  }
  return finish(p, best);
}

SdfResult SafeZone::query_brute_force(const Vec3& p) const {
  Candidate best;
  for (int t = 0; t < static_cast<int>(mesh_.triangles.size()); ++t) visit_triangle(t, p, best);
  return finish(p, best);
}

Eigen::AlignedBox3d SafeZone::bounds() const { return nodes_.front().box; }

}  // namespace tdcr
