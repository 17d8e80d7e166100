#include <Eigen/Dense>
#include <map>
#include <queue>
#include <set>
#include <unordered_set>

#include "rdsurf/mesh.hpp"

// Garland & Heckbert, "Surface simplification using quadric error metrics",
// with boundary constraint planes to keep open boundary loops in place.

namespace rdsurf {

namespace {

struct Quadric {
  Eigen::Matrix3d A = Eigen::Matrix3d::Zero();
  Vec3 b = Vec3::Zero();
  double c = 0.0;

  void add_plane(const Vec3& n, double d, double w) {
    A += w * n * n.transpose();
    b += w * d * n;
    c += w * d * d;
  }
  Quadric& operator+=(const Quadric& o) {
    A += o.A;
    b += o.b;
    c += o.c;
    return *this;
  }
  double eval(const Vec3& p) const {
    return p.dot(A * p) + 2.0 * b.dot(p) + c;
  }
};

inline std::pair<int, int> ekey(int a, int b) {
  return a < b ? std::make_pair(a, b) : std::make_pair(b, a);
}

struct HeapItem {
  double cost;
  int va, vb;
  Vec3 pos;
  long stamp;  // sum of endpoint versions when pushed
  bool operator<(const HeapItem& o) const { return cost > o.cost; }
};

}  // namespace

SurfaceMesh decimate(const SurfaceMesh& mesh, int target_triangles) {
  if (target_triangles >= mesh.n_triangles())
    throw MeshError("decimate: target must be below current triangle count");

  const int nv = mesh.n_vertices();
  std::vector<Vec3> pos(mesh.vertices);
  std::vector<std::array<int, 3>> faces(mesh.triangles);
  std::vector<char> face_alive(faces.size(), 1);
  std::vector<char> vert_alive(nv, 1);
  std::vector<char> on_boundary(mesh.vertex_on_boundary.begin(),
                                mesh.vertex_on_boundary.end());
  std::vector<long> version(nv, 0);
  std::vector<std::set<int>> vfaces(nv);
  for (size_t f = 0; f < faces.size(); ++f)
    for (int c = 0; c < 3; ++c) vfaces[faces[f][c]].insert(static_cast<int>(f));

  // Face-plane quadrics, area weighted.
  std::vector<Quadric> quadric(nv);
  double mean_q = 0.0;
  for (size_t f = 0; f < faces.size(); ++f) {
    const Vec3& p0 = pos[faces[f][0]];
    Vec3 nrm = (pos[faces[f][1]] - p0).cross(pos[faces[f][2]] - p0);
    double area2 = nrm.norm();
    if (area2 <= 0) continue;
    nrm /= area2;
    double area = 0.5 * area2;
    double d = -nrm.dot(p0);
    for (int c = 0; c < 3; ++c) quadric[faces[f][c]].add_plane(nrm, d, area);
    mean_q += area;
  }
  mean_q /= std::max<size_t>(1, faces.size());

  // Boundary constraint planes: through each boundary edge, perpendicular to
  // the adjacent face, weighted 1000x the mean face quadric.
  {
    std::map<std::pair<int, int>, std::pair<int, int>> edge_faces;  // (count, face)
    for (size_t f = 0; f < faces.size(); ++f)
      for (int c = 0; c < 3; ++c) {
        auto& ef = edge_faces[ekey(faces[f][c], faces[f][(c + 1) % 3])];
        ++ef.first;
        ef.second = static_cast<int>(f);
      }
    for (const auto& [e, ef] : edge_faces) {
      if (ef.first != 1) continue;
      const auto& tri = faces[ef.second];
      const Vec3& p0 = pos[tri[0]];
      Vec3 fn = (pos[tri[1]] - p0).cross(pos[tri[2]] - p0).normalized();
      Vec3 edir = (pos[e.second] - pos[e.first]).normalized();
      Vec3 cn = fn.cross(edir).normalized();  // normal of the constraint plane
      double d = -cn.dot(pos[e.first]);
      double w = 1000.0 * mean_q;
      quadric[e.first].add_plane(cn, d, w);
      quadric[e.second].add_plane(cn, d, w);
    }
  }

  int alive_faces = mesh.n_triangles();

  auto neighbors = [&](int v) {
    std::set<int> nb;
    for (int f : vfaces[v])
      for (int c = 0; c < 3; ++c)
        if (faces[f][c] != v) nb.insert(faces[f][c]);
    return nb;
  };
  auto is_edge_boundary = [&](int a, int b) {
    int shared = 0;
    for (int f : vfaces[a]) {
      const auto& tri = faces[f];
      if (tri[0] == b || tri[1] == b || tri[2] == b) ++shared;
    }
    return shared == 1;
  };

  auto placement = [&](int a, int b, double* cost_out) {
    Quadric q = quadric[a];
    q += quadric[b];
    Vec3 best;
    double best_cost;
    Eigen::LDLT<Eigen::Matrix3d> ldlt(q.A);
    bool solved = false;
    if (ldlt.info() == Eigen::Success) {
      Vec3 opt = ldlt.solve(-q.b);
      // the quadric can be rank deficient on flat regions, where the solve
      // is free to wander anywhere in the plane; keep the placement local
      Vec3 mid = 0.5 * (pos[a] + pos[b]);
      if ((q.A * opt + q.b).norm() <= 1e-8 * (q.b.norm() + 1.0) &&
          (opt - mid).norm() <= 2.0 * (pos[a] - pos[b]).norm()) {
        best = opt;
        best_cost = q.eval(opt);
        solved = true;
      }
    }
    // If one endpoint is on the boundary and the other is not, pin the
    // result to the boundary vertex so loops stay where they are.
    if (on_boundary[a] != on_boundary[b]) {
      best = on_boundary[a] ? pos[a] : pos[b];
      best_cost = q.eval(best);
      solved = true;
    }
    if (!solved) {
      best = pos[a];
      best_cost = q.eval(pos[a]);
      for (const Vec3& cand : {pos[b], Vec3(0.5 * (pos[a] + pos[b]))}) {
        double c = q.eval(cand);
        if (c < best_cost) {
          best_cost = c;
          best = cand;
        }
      }
    }
    // uniform-density regularizer: on flat regions all quadric costs vanish
    // and the tie-break must favour short edges or the mesh degenerates
    *cost_out = best_cost + 0.1 * mean_q * (pos[a] - pos[b]).squaredNorm();
    return best;
  };

  std::priority_queue<HeapItem> heap;
  auto push_edge = [&](int a, int b) {
    if (a == b || !vert_alive[a] || !vert_alive[b]) return;
    double cost;
    Vec3 p = placement(a, b, &cost);
    heap.push({cost, a, b, p, version[a] + version[b]});
  };
  {
    std::set<std::pair<int, int>> pushed;
    for (const auto& tri : faces)
      for (int c = 0; c < 3; ++c) {
        auto key = ekey(tri[c], tri[(c + 1) % 3]);
        if (pushed.insert(key).second) push_edge(key.first, key.second);
      }
  }

  auto collapse_valid = [&](int a, int b, const Vec3& newpos) {
    // Topological guards.
    bool bnd_edge = is_edge_boundary(a, b);
    if (on_boundary[a] && on_boundary[b] && !bnd_edge) return false;  // pinch
    std::set<int> shared_faces;
    for (int f : vfaces[a])
      if (vfaces[b].count(f)) shared_faces.insert(f);
    int expected = bnd_edge ? 1 : 2;
    if (static_cast<int>(shared_faces.size()) != expected) return false;
    // Link condition: common neighbors must be exactly the opposite corners.
    std::set<int> na = neighbors(a), nb = neighbors(b), common;
    for (int v : na)
      if (nb.count(v)) common.insert(v);
    std::set<int> opposite;
    for (int f : shared_faces)
      for (int c = 0; c < 3; ++c)
        if (faces[f][c] != a && faces[f][c] != b) opposite.insert(faces[f][c]);
    if (common != opposite) return false;
    // Geometric guards: no flipped or degenerate surviving triangles.
    for (int who : {a, b}) {
      for (int f : vfaces[who]) {
        if (shared_faces.count(f)) continue;
        Vec3 p[3], pnew[3];
        for (int c = 0; c < 3; ++c) {
          int v = faces[f][c];
          p[c] = pos[v];
          pnew[c] = (v == a || v == b) ? newpos : pos[v];
        }
        Vec3 n_old = (p[1] - p[0]).cross(p[2] - p[0]);
        Vec3 n_new = (pnew[1] - pnew[0]).cross(pnew[2] - pnew[0]);
        if (n_new.norm() <= 1e-14) return false;
        if (n_old.normalized().dot(n_new.normalized()) < 0.1) return false;
      }
    }
    return true;
  };

  while (alive_faces > target_triangles && !heap.empty()) {
    HeapItem item = heap.top();
    heap.pop();
    int a = item.va, b = item.vb;
    if (!vert_alive[a] || !vert_alive[b]) continue;
    if (item.stamp != version[a] + version[b]) continue;  // stale
    if (!vfaces[a].count(*vfaces[b].begin()) && !is_edge_boundary(a, b)) {
      // cheap reject of edges that no longer exist
      std::set<int> shared;
      for (int f : vfaces[a])
        if (vfaces[b].count(f)) shared.insert(f);
      if (shared.empty()) continue;
    }
    if (!collapse_valid(a, b, item.pos)) continue;

    // Collapse b into a at item.pos.
    quadric[a] += quadric[b];
    pos[a] = item.pos;
    on_boundary[a] = on_boundary[a] || on_boundary[b];
    std::vector<int> dead;
    for (int f : vfaces[a])
      if (vfaces[b].count(f)) dead.push_back(f);
    for (int f : dead) {
      face_alive[f] = 0;
      --alive_faces;
      for (int c = 0; c < 3; ++c) vfaces[faces[f][c]].erase(f);
    }
    for (int f : std::vector<int>(vfaces[b].begin(), vfaces[b].end())) {
      for (int c = 0; c < 3; ++c)
        if (faces[f][c] == b) faces[f][c] = a;
      vfaces[b].erase(f);
      vfaces[a].insert(f);
    }
    vert_alive[b] = 0;
    ++version[a];
    ++version[b];
    for (int v : neighbors(a)) push_edge(a, v);
  }

  if (alive_faces > target_triangles + 2)
    throw MeshError("decimate: cannot reach target (topology constraints)");

  SurfaceMesh out;
  std::vector<int> remap(nv, -1);
  for (int v = 0; v < nv; ++v)
    if (vert_alive[v] && !vfaces[v].empty()) {
      remap[v] = out.n_vertices();
      out.vertices.push_back(pos[v]);
    }
  for (size_t f = 0; f < faces.size(); ++f)
    if (face_alive[f])
      out.triangles.push_back(
          {remap[faces[f][0]], remap[faces[f][1]], remap[faces[f][2]]});
  out.finalize();
  return out;
}

}  // namespace rdsurf
