#include "rdsurf/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>
#include <unordered_map>

namespace rdsurf {

namespace {

// Undirected edge key.
inline std::pair<int, int> edge_key(int a, int b) {
  return a < b ? std::make_pair(a, b) : std::make_pair(b, a);
}

std::string fmt17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

}  // namespace

double SurfaceMesh::triangle_area(int t) const {
  const auto& tri = triangles[t];
  const Vec3 e1 = vertices[tri[1]] - vertices[tri[0]];
  const Vec3 e2 = vertices[tri[2]] - vertices[tri[0]];
  return 0.5 * e1.cross(e2).norm();
}

double SurfaceMesh::total_area() const {
  double a = 0.0;
  for (int t = 0; t < n_triangles(); ++t) a += triangle_area(t);
  return a;
}

Eigen::AlignedBox3d SurfaceMesh::bounding_box() const {
  Eigen::AlignedBox3d box;
  for (const auto& v : vertices) box.extend(v);
  return box;
}

void SurfaceMesh::finalize() {
  const int nv = n_vertices();
  for (const auto& tri : triangles) {
    for (int c = 0; c < 3; ++c) {
      if (tri[c] < 0 || tri[c] >= nv)
        throw ParseError("triangle references out-of-range vertex index " +
                         std::to_string(tri[c]));
    }
    if (tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2])
      throw ParseError("triangle with repeated vertex indices");
  }

  double mean_area = 0.0;
  for (int t = 0; t < n_triangles(); ++t) mean_area += triangle_area(t);
  if (!triangles.empty()) mean_area /= static_cast<double>(n_triangles());
  for (int t = 0; t < n_triangles(); ++t) {
    if (triangle_area(t) <= 1e-12 * mean_area)
      throw MeshError("zero-area triangle " + std::to_string(t));
  }

  std::map<std::pair<int, int>, int> edge_count;
  for (const auto& tri : triangles) {
    for (int c = 0; c < 3; ++c) {
      int cnt = ++edge_count[edge_key(tri[c], tri[(c + 1) % 3])];
      if (cnt > 2) throw NonManifoldError("edge shared by more than two triangles");
    }
  }

  vertex_on_boundary.assign(nv, 0);
  for (const auto& [e, cnt] : edge_count) {
    if (cnt == 1) {
      vertex_on_boundary[e.first] = 1;
      vertex_on_boundary[e.second] = 1;
    }
  }
  boundary_vertices.clear();
  for (int v = 0; v < nv; ++v)
    if (vertex_on_boundary[v]) boundary_vertices.push_back(v);
}

std::vector<std::array<int, 2>> SurfaceMesh::boundary_edges() const {
  std::map<std::pair<int, int>, int> edge_count;
  for (const auto& tri : triangles)
    for (int c = 0; c < 3; ++c) ++edge_count[edge_key(tri[c], tri[(c + 1) % 3])];
  std::vector<std::array<int, 2>> out;
  for (const auto& [e, cnt] : edge_count)
    if (cnt == 1) out.push_back({e.first, e.second});
  return out;
}

int SurfaceMesh::euler_characteristic() const {
  std::map<std::pair<int, int>, int> edges;
  for (const auto& tri : triangles)
    for (int c = 0; c < 3; ++c) edges[edge_key(tri[c], tri[(c + 1) % 3])] = 1;
  return n_vertices() - static_cast<int>(edges.size()) + n_triangles();
}

int SurfaceMesh::boundary_loop_count() const {
  auto bedges = boundary_edges();
  std::unordered_map<int, std::vector<int>> adj;
  for (const auto& e : bedges) {
    adj[e[0]].push_back(e[1]);
    adj[e[1]].push_back(e[0]);
  }
  std::unordered_map<int, char> seen;
  int loops = 0;
  for (const auto& [v, _] : adj) {
    if (seen[v]) continue;
    ++loops;
    std::vector<int> stack{v};
    seen[v] = 1;
    while (!stack.empty()) {
      int u = stack.back();
      stack.pop_back();
      for (int w : adj[u])
        if (!seen[w]) {
          seen[w] = 1;
          stack.push_back(w);
        }
    }
  }
  return loops;
}

// ---------------------------------------------------------------------------
// I/O

namespace {

SurfaceMesh load_obj(std::istream& in) {
  SurfaceMesh mesh;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag)) continue;
    if (tag == "v") {
      Vec3 p;
      if (!(ls >> p.x() >> p.y() >> p.z()))
        throw ParseError("OBJ line " + std::to_string(lineno) + ": bad vertex");
      mesh.vertices.push_back(p);
    } else if (tag == "f") {
      std::vector<int> idx;
      std::string tok;
      while (ls >> tok) {
        // accept v, v/vt, v/vt/vn, v//vn
        size_t slash = tok.find('/');
        std::string head = slash == std::string::npos ? tok : tok.substr(0, slash);
        int i = 0;
        try {
          i = std::stoi(head);
        } catch (...) {
          throw ParseError("OBJ line " + std::to_string(lineno) + ": bad face index");
        }
        if (i == 0)
          throw ParseError("OBJ line " + std::to_string(lineno) +
                           ": face index 0 (OBJ indices are 1-based)");
        if (i < 0) i = static_cast<int>(mesh.vertices.size()) + 1 + i;
        idx.push_back(i - 1);
      }
      if (idx.size() < 3)
        throw ParseError("OBJ line " + std::to_string(lineno) + ": face with <3 vertices");
      for (size_t k = 1; k + 1 < idx.size(); ++k)  // fan-triangulate
        mesh.triangles.push_back({idx[0], idx[k], idx[k + 1]});
    }
  }
  mesh.finalize();
  return mesh;
}

SurfaceMesh load_off(std::istream& in) {
  auto next_token = [&in]() {
    std::string tok;
    while (in >> tok) {
      if (tok[0] == '#') {
        std::string rest;
        std::getline(in, rest);
        continue;
      }
      return tok;
    }
    throw ParseError("OFF: unexpected end of file");
  };
  std::string header = next_token();
  if (header != "OFF") throw ParseError("OFF: missing OFF header");
  int nv = 0, nf = 0, ne = 0;
  try {
    nv = std::stoi(next_token());
    nf = std::stoi(next_token());
    ne = std::stoi(next_token());
    (void)ne;
  } catch (...) {
    throw ParseError("OFF: bad counts line");
  }
  SurfaceMesh mesh;
  mesh.vertices.resize(nv);
  for (int v = 0; v < nv; ++v) {
    try {
      mesh.vertices[v].x() = std::stod(next_token());
      mesh.vertices[v].y() = std::stod(next_token());
      mesh.vertices[v].z() = std::stod(next_token());
    } catch (const ParseError&) {
      throw;
    } catch (...) {
      throw ParseError("OFF: bad vertex coordinate");
    }
  }
  for (int f = 0; f < nf; ++f) {
    int n = std::stoi(next_token());
    if (n < 3) throw ParseError("OFF: face with <3 vertices");
    std::vector<int> idx(n);
    for (int c = 0; c < n; ++c) idx[c] = std::stoi(next_token());
    for (int k = 1; k + 1 < n; ++k)
      mesh.triangles.push_back({idx[0], idx[k], idx[k + 1]});
  }
  mesh.finalize();
  return mesh;
}

MeshFormat format_from_path(const std::string& path) {
  auto dot = path.rfind('.');
  std::string ext = dot == std::string::npos ? "" : path.substr(dot + 1);
  for (auto& c : ext) c = static_cast<char>(std::tolower(c));
  if (ext == "obj") return MeshFormat::OBJ;
  if (ext == "off") return MeshFormat::OFF;
  throw ParseError("cannot infer mesh format from path: " + path);
}

}  // namespace

SurfaceMesh load_mesh(const std::string& path, MeshFormat format) {
  std::ifstream in(path);
  if (!in) throw MeshError("cannot open mesh file: " + path);
  return format == MeshFormat::OBJ ? load_obj(in) : load_off(in);
}

SurfaceMesh load_mesh(const std::string& path) {
  return load_mesh(path, format_from_path(path));
}

void save_off(const SurfaceMesh& mesh, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw MeshError("cannot open for writing: " + path);
  out << "OFF\n" << mesh.n_vertices() << ' ' << mesh.n_triangles() << " 0\n";
  for (const auto& v : mesh.vertices)
    out << fmt17(v.x()) << ' ' << fmt17(v.y()) << ' ' << fmt17(v.z()) << '\n';
  for (const auto& t : mesh.triangles)
    out << "3 " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
}

void save_obj(const SurfaceMesh& mesh, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw MeshError("cannot open for writing: " + path);
  for (const auto& v : mesh.vertices)
    out << "v " << fmt17(v.x()) << ' ' << fmt17(v.y()) << ' ' << fmt17(v.z()) << '\n';
  for (const auto& t : mesh.triangles)
    out << "f " << t[0] + 1 << ' ' << t[1] + 1 << ' ' << t[2] + 1 << '\n';
}

void save_mesh(const SurfaceMesh& mesh, const std::string& path) {
  if (format_from_path(path) == MeshFormat::OBJ)
    save_obj(mesh, path);
  else
    save_off(mesh, path);
}

// ---------------------------------------------------------------------------
// Generators

SurfaceMesh generate_rectangle(double W, double H, int nx, int ny) {
  if (W <= 0 || H <= 0 || nx < 1 || ny < 1)
    throw MeshError("generate_rectangle: invalid arguments");
  SurfaceMesh mesh;
  mesh.vertices.reserve(static_cast<size_t>(nx + 1) * (ny + 1));
  for (int j = 0; j <= ny; ++j)
    for (int i = 0; i <= nx; ++i)
      mesh.vertices.emplace_back(W * i / nx, H * j / ny, 0.0);
  auto vid = [nx](int i, int j) { return j * (nx + 1) + i; };
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      int v00 = vid(i, j), v10 = vid(i + 1, j);
      int v01 = vid(i, j + 1), v11 = vid(i + 1, j + 1);
      mesh.triangles.push_back({v00, v10, v11});
      mesh.triangles.push_back({v00, v11, v01});
    }
  mesh.finalize();
  return mesh;
}

SurfaceMesh generate_spherical_cap(double R, double zeta, int n) {
  if (R <= 0 || zeta <= 0 || zeta > 1 || n < 2)
    throw MeshError("generate_spherical_cap: invalid arguments");
  const double theta_max = std::asin(zeta);
  const double rho = R / zeta;  // sphere radius
  SurfaceMesh mesh;
  // Apex plus concentric rings of quasi-uniform spacing; rim is ring n.
  const double dtheta = theta_max / n;
  std::vector<std::vector<int>> rings(n + 1);
  const double apex_z = rho;
  mesh.vertices.emplace_back(0.0, 0.0, apex_z);
  rings[0] = {0};
  for (int i = 1; i <= n; ++i) {
    const double theta = i * dtheta;
    const int m = std::max(6, static_cast<int>(std::lround(
                                  2.0 * std::numbers::pi * std::sin(theta) / dtheta)));
    rings[i].resize(m);
    for (int k = 0; k < m; ++k) {
      const double phi = 2.0 * std::numbers::pi * k / m;
      rings[i][k] = mesh.n_vertices();
      mesh.vertices.emplace_back(rho * std::sin(theta) * std::cos(phi),
                                 rho * std::sin(theta) * std::sin(phi),
                                 rho * std::cos(theta));
    }
  }
  // Shift so the rim sits at z = 0.
  const double z_rim = rho * std::cos(theta_max);
  for (auto& v : mesh.vertices) v.z() -= z_rim;

  // Fan the apex to ring 1.
  for (size_t k = 0; k < rings[1].size(); ++k) {
    int a = rings[1][k];
    int b = rings[1][(k + 1) % rings[1].size()];
    mesh.triangles.push_back({0, a, b});
  }
  // Stitch consecutive rings with a two-pointer sweep by angle.
  for (int i = 1; i < n; ++i) {
    const auto& inner = rings[i];
    const auto& outer = rings[i + 1];
    const int ni = static_cast<int>(inner.size());
    const int no = static_cast<int>(outer.size());
    int a = 0, b = 0;  // indices into inner/outer (wrapping)
    while (a < ni || b < no) {
      const double ang_a = (a + 1.0) / ni;
      const double ang_b = (b + 1.0) / no;
      const bool advance_outer = (a == ni) ? true : (b == no) ? false : ang_b <= ang_a;
      if (advance_outer) {
        mesh.triangles.push_back({inner[a % ni], outer[b % no], outer[(b + 1) % no]});
        ++b;
      } else {
        mesh.triangles.push_back({inner[a % ni], outer[b % no], inner[(a + 1) % ni]});
        ++a;
      }
    }
  }
  mesh.finalize();
  return mesh;
}

SurfaceMesh generate_icosphere(int subdivisions, double radius) {
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  SurfaceMesh mesh;
  mesh.vertices = {{-1, t, 0}, {1, t, 0},   {-1, -t, 0}, {1, -t, 0},
                   {0, -1, t}, {0, 1, t},   {0, -1, -t}, {0, 1, -t},
                   {t, 0, -1}, {t, 0, 1},   {-t, 0, -1}, {-t, 0, 1}};
  mesh.triangles = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
                    {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
                    {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
                    {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
  for (auto& v : mesh.vertices) v = radius * v.normalized();
  for (int s = 0; s < subdivisions; ++s) {
    mesh = subdivide(mesh);
    for (auto& v : mesh.vertices) v = radius * v.normalized();
  }
  mesh.finalize();
  return mesh;
}

SurfaceMesh subdivide(const SurfaceMesh& mesh,
                      std::vector<std::array<int, 2>>* midpoint_of) {
  SurfaceMesh out;
  out.vertices = mesh.vertices;
  if (midpoint_of) midpoint_of->clear();
  std::map<std::pair<int, int>, int> midpoint;
  auto mid = [&](int a, int b) {
    auto key = edge_key(a, b);
    auto it = midpoint.find(key);
    if (it != midpoint.end()) return it->second;
    int idx = out.n_vertices();
    out.vertices.push_back(0.5 * (mesh.vertices[a] + mesh.vertices[b]));
    if (midpoint_of) midpoint_of->push_back({key.first, key.second});
    midpoint[key] = idx;
    return idx;
  };
  for (const auto& tri : mesh.triangles) {
    int m01 = mid(tri[0], tri[1]);
    int m12 = mid(tri[1], tri[2]);
    int m20 = mid(tri[2], tri[0]);
    out.triangles.push_back({tri[0], m01, m20});
    out.triangles.push_back({tri[1], m12, m01});
    out.triangles.push_back({tri[2], m20, m12});
    out.triangles.push_back({m01, m12, m20});
  }
  out.finalize();
  return out;
}

Eigen::VectorXd InterpolationMap::apply(const Eigen::VectorXd& field) const {
  if (field.size() != n_source)
    throw MeshError("InterpolationMap::apply: field length mismatch");
  Eigen::VectorXd out(rows.size());
  for (size_t r = 0; r < rows.size(); ++r) {
    double v = 0.0;
    for (const auto& e : rows[r])
      if (e.src >= 0) v += e.w * field[e.src];
    out[static_cast<Eigen::Index>(r)] = v;
  }
  return out;
}

bool InterpolationMap::is_identity() const {
  if (n_target() != n_source) return false;
  for (int r = 0; r < n_target(); ++r) {
    const auto& row = rows[r];
    if (row[0].src != r || std::abs(row[0].w - 1.0) > 1e-12) return false;
    if (row[1].src >= 0 && std::abs(row[1].w) > 1e-12) return false;
    if (row[2].src >= 0 && std::abs(row[2].w) > 1e-12) return false;
  }
  return true;
}

void save_interpolation_csv(const InterpolationMap& map, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw MeshError("cannot open for writing: " + path);
  out << "target_index,src0,w0,src1,w1,src2,w2\n";
  for (int r = 0; r < map.n_target(); ++r) {
    const auto& row = map.rows[r];
    out << r;
    for (const auto& e : row) out << ',' << e.src << ',' << fmt17(e.w);
    out << '\n';
  }
}

}  // namespace rdsurf
