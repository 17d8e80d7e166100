#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "rdsurf/mesh.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace rdsurf {

namespace {

// Closest point on triangle (Ericson, Real-Time Collision Detection 5.1.5),
// returned with barycentric coordinates.
Vec3 closest_point_triangle(const Vec3& p, const Vec3& a, const Vec3& b,
                            const Vec3& c, Vec3* bary) {
  Vec3 ab = b - a, ac = c - a, ap = p - a;
  double d1 = ab.dot(ap), d2 = ac.dot(ap);
  if (d1 <= 0 && d2 <= 0) {
    *bary = {1, 0, 0};
    return a;
  }
  Vec3 bp = p - b;
  double d3 = ab.dot(bp), d4 = ac.dot(bp);
  if (d3 >= 0 && d4 <= d3) {
    *bary = {0, 1, 0};
    return b;
  }
  double vc = d1 * d4 - d3 * d2;
  if (vc <= 0 && d1 >= 0 && d3 <= 0) {
    double v = d1 / (d1 - d3);
    *bary = {1 - v, v, 0};
    return a + v * ab;
  }
  Vec3 cp = p - c;
  double d5 = ab.dot(cp), d6 = ac.dot(cp);
  if (d6 >= 0 && d5 <= d6) {
    *bary = {0, 0, 1};
    return c;
  }
  double vb = d5 * d2 - d1 * d6;
  if (vb <= 0 && d2 >= 0 && d6 <= 0) {
    double w = d2 / (d2 - d6);
    *bary = {1 - w, 0, w};
    return a + w * ac;
  }
  double va = d3 * d6 - d5 * d4;
  if (va <= 0 && (d4 - d3) >= 0 && (d5 - d6) >= 0) {
    double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
    *bary = {0, 1 - w, w};
    return b + w * (c - b);
  }
  double denom = 1.0 / (va + vb + vc);
  double v = vb * denom, w = vc * denom;
  *bary = {1 - v - w, v, w};
  return a + ab * v + ac * w;
}

struct BvhNode {
  Eigen::AlignedBox3d box;
  int left = -1, right = -1;   // children, or
  int begin = 0, end = 0;      // leaf range into face_order
};

class FaceBvh {
 public:
  explicit FaceBvh(const SurfaceMesh& mesh) : mesh_(mesh) {
    face_order_.resize(mesh.n_triangles());
    std::iota(face_order_.begin(), face_order_.end(), 0);
    nodes_.reserve(2 * face_order_.size());
    build(0, static_cast<int>(face_order_.size()));
  }

  // Nearest face to p; ties broken towards the lowest face index.
  void query(const Vec3& p, int* face, double* dist2, Vec3* bary) const {
    *face = -1;
    *dist2 = std::numeric_limits<double>::max();
    search(0, p, face, dist2, bary);
  }

 private:
  int build(int begin, int end) {
    int id = static_cast<int>(nodes_.size());
    nodes_.emplace_back();
    Eigen::AlignedBox3d box;
    for (int i = begin; i < end; ++i)
      for (int c = 0; c < 3; ++c)
        box.extend(mesh_.vertices[mesh_.triangles[face_order_[i]][c]]);
    nodes_[id].box = box;
    if (end - begin <= 4) {
      nodes_[id].begin = begin;
      nodes_[id].end = end;
      // keep lowest indices first so equal-distance ties resolve low
      std::sort(face_order_.begin() + begin, face_order_.begin() + end);
      return id;
    }
    Vec3 ext = box.sizes();
    int axis = 0;
    if (ext.y() > ext.x()) axis = 1;
    if (ext.z() > ext[axis]) axis = 2;
    int mid = (begin + end) / 2;
    std::nth_element(face_order_.begin() + begin, face_order_.begin() + mid,
                     face_order_.begin() + end, [&](int fa, int fb) {
                       return centroid(fa)[axis] < centroid(fb)[axis];
                     });
    int l = build(begin, mid);
    int r = build(mid, end);
    nodes_[id].left = l;
    nodes_[id].right = r;
    return id;
  }

  Vec3 centroid(int f) const {
    const auto& t = mesh_.triangles[f];
    return (mesh_.vertices[t[0]] + mesh_.vertices[t[1]] + mesh_.vertices[t[2]]) / 3.0;
  }

  void search(int node, const Vec3& p, int* face, double* dist2, Vec3* bary) const {
    const BvhNode& n = nodes_[node];
    if (n.box.squaredExteriorDistance(p) > *dist2 + 1e-14) return;
    if (n.left < 0) {
      for (int i = n.begin; i < n.end; ++i) {
        int f = face_order_[i];
        const auto& t = mesh_.triangles[f];
        Vec3 bc;
        Vec3 q = closest_point_triangle(p, mesh_.vertices[t[0]],
                                        mesh_.vertices[t[1]],
                                        mesh_.vertices[t[2]], &bc);
        double d2 = (q - p).squaredNorm();
        const double tie = 1e-24 + 1e-12 * *dist2;
        if (d2 < *dist2 - tie || (std::abs(d2 - *dist2) <= tie && f < *face)) {
          *dist2 = std::min(d2, *dist2);
          *face = f;
          *bary = bc;
        }
      }
      return;
    }
    // visit nearer child first
    double dl = nodes_[n.left].box.squaredExteriorDistance(p);
    double dr = nodes_[n.right].box.squaredExteriorDistance(p);
    if (dl <= dr) {
      search(n.left, p, face, dist2, bary);
      search(n.right, p, face, dist2, bary);
    } else {
      search(n.right, p, face, dist2, bary);
      search(n.left, p, face, dist2, bary);
    }
  }

  const SurfaceMesh& mesh_;
  std::vector<int> face_order_;
  std::vector<BvhNode> nodes_;
};

}  // namespace

InterpolationMap build_interpolation(const SurfaceMesh& source,
                                     const SurfaceMesh& target,
                                     double max_dist_fraction) {
  FaceBvh bvh(source);
  const double limit = max_dist_fraction * source.bounding_box().diagonal().norm();
  InterpolationMap map;
  map.n_source = source.n_vertices();
  map.rows.resize(target.n_vertices());
  std::vector<double> dists(target.n_vertices());

#pragma omp parallel for schedule(dynamic, 64)
  for (int v = 0; v < target.n_vertices(); ++v) {
    int face;
    double d2;
    Vec3 bary;
    bvh.query(target.vertices[v], &face, &d2, &bary);
    dists[v] = std::sqrt(d2);
    const auto& tri = source.triangles[face];
    std::array<InterpolationMap::Entry, 3> row;
    for (int c = 0; c < 3; ++c) row[c] = {tri[c], bary[c]};
    // snap to exact vertex/edge hits so identity maps come out clean
    for (int c = 0; c < 3; ++c)
      if (std::abs(row[c].w) < 1e-12) {
        row[c].w = 0.0;
        row[c].src = -1;
      }
    double wsum = 0.0;
    for (const auto& e : row)
      if (e.src >= 0) wsum += e.w;
    for (auto& e : row)
      if (e.src >= 0) e.w /= wsum;
    std::sort(row.begin(), row.end(), [](const auto& a, const auto& b) {
      if ((a.src >= 0) != (b.src >= 0)) return a.src >= 0;
      return a.w > b.w;
    });
    map.rows[v] = row;
  }

  for (int v = 0; v < target.n_vertices(); ++v)
    if (dists[v] > limit)
      throw MeshError("build_interpolation: target vertex " + std::to_string(v) +
                      " projects farther than the distance limit");
  return map;
}

}  // namespace rdsurf
