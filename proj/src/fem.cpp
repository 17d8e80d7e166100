#include "rdsurf/fem.hpp"

#include <array>
#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace rdsurf {

namespace {

struct TriGeom {
  double area;
  Eigen::Vector3d grad[3];  // P1 shape gradients, tangent to the triangle
};

TriGeom tri_geometry(const SurfaceMesh& mesh, int t) {
  const auto& tri = mesh.triangles[size_t(t)];
  const Eigen::Vector3d p0(mesh.vertices[size_t(tri[0])].data());
  const Eigen::Vector3d p1(mesh.vertices[size_t(tri[1])].data());
  const Eigen::Vector3d p2(mesh.vertices[size_t(tri[2])].data());
  const Eigen::Vector3d n = (p1 - p0).cross(p2 - p0);
  const double two_area = n.norm();
  TriGeom g;
  g.area = 0.5 * two_area;
  const Eigen::Vector3d nn = n / two_area;
  g.grad[0] = nn.cross(p2 - p1) / two_area;
  g.grad[1] = nn.cross(p0 - p2) / two_area;
  g.grad[2] = nn.cross(p1 - p0) / two_area;
  return g;
}

// degree-5 rule, 7 points, weights sum to 1
constexpr int kNQ = 7;
const double kQW[kNQ] = {0.225,
                         0.132394152788506, 0.132394152788506, 0.132394152788506,
                         0.125939180544827, 0.125939180544827, 0.125939180544827};
const double kQB[kNQ][3] = {
    {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0},
    {0.059715871789770, 0.470142064105115, 0.470142064105115},
    {0.470142064105115, 0.059715871789770, 0.470142064105115},
    {0.470142064105115, 0.470142064105115, 0.059715871789770},
    {0.797426985353087, 0.101286507323456, 0.101286507323456},
    {0.101286507323456, 0.797426985353087, 0.101286507323456},
    {0.101286507323456, 0.101286507323456, 0.797426985353087}};

using Triplet = Eigen::Triplet<double>;

template <class LocalFn>
SpMat assemble_full(const SurfaceMesh& mesh, Assembly mode, LocalFn local) {
  const int nt = int(mesh.triangles.size());
  const int nv = int(mesh.vertices.size());
  std::vector<Triplet> trips(size_t(nt) * 9);
#ifdef _OPENMP
  const bool parallel = mode == Assembly::Parallel;
#else
  (void)mode;
  const bool parallel = false;
#endif
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (parallel)
#endif
  for (int t = 0; t < nt; ++t) {
    double loc[3][3];
    local(t, loc);
    const auto& tri = mesh.triangles[size_t(t)];
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        trips[size_t(t) * 9 + size_t(i) * 3 + size_t(j)] =
            Triplet(tri[i], tri[j], loc[i][j]);
  }
  SpMat m(nv, nv);
  m.setFromTriplets(trips.begin(), trips.end());
  return m;
}

SpMat restrict_matrix(const SpMat& full, const std::vector<int>& vertex_to_dof,
                      int n_dof) {
  std::vector<Triplet> trips;
  trips.reserve(size_t(full.nonZeros()));
  for (int c = 0; c < full.outerSize(); ++c) {
    const int jc = vertex_to_dof[size_t(c)];
    if (jc < 0) continue;
    for (SpMat::InnerIterator it(full, c); it; ++it) {
      const int ir = vertex_to_dof[size_t(it.row())];
      if (ir >= 0) trips.emplace_back(ir, jc, it.value());
    }
  }
  SpMat m(n_dof, n_dof);
  m.setFromTriplets(trips.begin(), trips.end());
  return m;
}

}  // namespace

SpMat assemble_mass_full(const SurfaceMesh& mesh, Assembly mode) {
  return assemble_full(mesh, mode, [&](int t, double loc[3][3]) {
    const double a12 = tri_geometry(mesh, t).area / 12.0;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) loc[i][j] = a12 * (i == j ? 2.0 : 1.0);
  });
}

SpMat assemble_stiffness_full(const SurfaceMesh& mesh, Assembly mode) {
  return assemble_full(mesh, mode, [&](int t, double loc[3][3]) {
    const TriGeom g = tri_geometry(mesh, t);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        loc[i][j] = g.area * g.grad[i].dot(g.grad[j]);
  });
}

FemSpace make_fem_space(const SurfaceMesh& mesh, BC bc, Assembly mode) {
  if (bc == BC::Closed && !mesh.boundary_vertices.empty())
    throw MeshError("closed boundary condition on a mesh with boundary");
  if (bc == BC::DirichletZero && mesh.boundary_vertices.empty())
    throw MeshError("Dirichlet condition on a mesh without boundary");
  FemSpace s;
  s.mesh = &mesh;
  s.bc = bc;
  const int nv = int(mesh.vertices.size());
  s.vertex_to_dof.assign(size_t(nv), -1);
  for (int v = 0; v < nv; ++v) {
    if (bc == BC::DirichletZero && mesh.vertex_on_boundary[size_t(v)]) continue;
    s.vertex_to_dof[size_t(v)] = int(s.dof_to_vertex.size());
    s.dof_to_vertex.push_back(v);
  }
  s.n_dof = int(s.dof_to_vertex.size());
  if (s.n_dof == 0) throw MeshError("no degrees of freedom left");
  s.mass_full = assemble_mass_full(mesh, mode);
  s.stiffness_full = assemble_stiffness_full(mesh, mode);
  return s;
}

SpMat assemble_mass(const FemSpace& s) {
  return restrict_matrix(s.mass_full, s.vertex_to_dof, s.n_dof);
}

SpMat assemble_stiffness(const FemSpace& s) {
  return restrict_matrix(s.stiffness_full, s.vertex_to_dof, s.n_dof);
}

Vec expand_field(const FemSpace& s, const Vec& dof_values, double boundary_value) {
  if (dof_values.size() != s.n_dof)
    throw std::invalid_argument("expand_field: wrong dof count");
  Vec out = Vec::Constant(Eigen::Index(s.mesh->vertices.size()), boundary_value);
  for (int d = 0; d < s.n_dof; ++d) out[s.dof_to_vertex[size_t(d)]] = dof_values[d];
  return out;
}

Vec restrict_field(const FemSpace& s, const Vec& vertex_values) {
  if (vertex_values.size() != Eigen::Index(s.mesh->vertices.size()))
    throw std::invalid_argument("restrict_field: wrong vertex count");
  Vec out(s.n_dof);
  for (int d = 0; d < s.n_dof; ++d) out[d] = vertex_values[s.dof_to_vertex[size_t(d)]];
  return out;
}

Vec homogeneous_state_vector(const FemSpace& s, const RDModel& model,
                             double alpha) {
  const auto h = model.primary_state(alpha);
  Vec x(2 * s.n_dof);
  x.head(s.n_dof).setConstant(h.a0);
  x.tail(s.n_dof).setConstant(h.b0);
  return x;
}

Vec assemble_residual(const FemSpace& s, const RDModel& model, const Vec& x,
                      double alpha, Assembly mode) {
  const int n = s.n_dof;
  if (x.size() != 2 * n)
    throw std::invalid_argument("assemble_residual: wrong state size");
  const auto h = model.primary_state(alpha);
  const double ba = s.bc == BC::DirichletZero ? h.a0 : 0.0;
  const double bb = s.bc == BC::DirichletZero ? h.b0 : 0.0;
  const Vec av = expand_field(s, x.head(n), ba);
  const Vec bv = expand_field(s, x.tail(n), bb);

  const double d1 = model.D1(alpha), d2 = model.D2(alpha);
  const double chi = model.chemotaxis(alpha);
  Vec ra = -d1 * (s.stiffness_full * av);
  Vec rb = -d2 * (s.stiffness_full * bv);

  const SurfaceMesh& mesh = *s.mesh;
  const int nt = int(mesh.triangles.size());
  std::vector<std::array<double, 6>> contrib(static_cast<size_t>(nt));
#ifdef _OPENMP
  const bool parallel = mode == Assembly::Parallel;
#pragma omp parallel for schedule(static) if (parallel)
#else
  (void)mode;
#endif
  for (int t = 0; t < nt; ++t) {
    const TriGeom g = tri_geometry(mesh, t);
    const auto& tri = mesh.triangles[size_t(t)];
    const double a0 = av[tri[0]], a1 = av[tri[1]], a2 = av[tri[2]];
    const double b0 = bv[tri[0]], b1 = bv[tri[1]], b2 = bv[tri[2]];
    const Eigen::Vector3d gb = b0 * g.grad[0] + b1 * g.grad[1] + b2 * g.grad[2];
    const double amean = (a0 + a1 + a2) / 3.0;
    std::array<double, 6> c{};
    for (int q = 0; q < kNQ; ++q) {
      const double aq = kQB[q][0] * a0 + kQB[q][1] * a1 + kQB[q][2] * a2;
      const double bq = kQB[q][0] * b0 + kQB[q][1] * b1 + kQB[q][2] * b2;
      const double wf = kQW[q] * g.area * model.f(aq, bq, alpha);
      const double wg = kQW[q] * g.area * model.g(aq, bq, alpha);
      for (int i = 0; i < 3; ++i) {
        c[size_t(i)] += wf * kQB[q][i];
        c[size_t(3 + i)] += wg * kQB[q][i];
      }
    }
    if (chi != 0.0) {
      for (int i = 0; i < 3; ++i)
        c[size_t(i)] += chi * g.area * amean * gb.dot(g.grad[i]);
    }
    contrib[size_t(t)] = c;
  }
  for (int t = 0; t < nt; ++t) {
    const auto& tri = mesh.triangles[size_t(t)];
    for (int i = 0; i < 3; ++i) {
      ra[tri[i]] += contrib[size_t(t)][size_t(i)];
      rb[tri[i]] += contrib[size_t(t)][size_t(3 + i)];
    }
  }

  Vec r(2 * n);
  r.head(n) = restrict_field(s, ra);
  r.tail(n) = restrict_field(s, rb);
  return r;
}

SpMat assemble_jacobian(const FemSpace& s, const RDModel& model, const Vec& x,
                        double alpha, Assembly mode) {
  const int n = s.n_dof;
  if (x.size() != 2 * n)
    throw std::invalid_argument("assemble_jacobian: wrong state size");
  const auto h = model.primary_state(alpha);
  const double ba = s.bc == BC::DirichletZero ? h.a0 : 0.0;
  const double bb = s.bc == BC::DirichletZero ? h.b0 : 0.0;
  const Vec av = expand_field(s, x.head(n), ba);
  const Vec bv = expand_field(s, x.tail(n), bb);

  const double d1 = model.D1(alpha), d2 = model.D2(alpha);
  const double chi = model.chemotaxis(alpha);
  const SurfaceMesh& mesh = *s.mesh;
  const int nt = int(mesh.triangles.size());
  std::vector<Triplet> trips(size_t(nt) * 36);
#ifdef _OPENMP
  const bool parallel = mode == Assembly::Parallel;
#pragma omp parallel for schedule(static) if (parallel)
#else
  (void)mode;
#endif
  for (int t = 0; t < nt; ++t) {
    const TriGeom g = tri_geometry(mesh, t);
    const auto& tri = mesh.triangles[size_t(t)];
    const double a0 = av[tri[0]], a1 = av[tri[1]], a2 = av[tri[2]];
    const double b0 = bv[tri[0]], b1 = bv[tri[1]], b2 = bv[tri[2]];
    const Eigen::Vector3d gb = b0 * g.grad[0] + b1 * g.grad[1] + b2 * g.grad[2];
    const double amean = (a0 + a1 + a2) / 3.0;

    double jaa[3][3] = {}, jab[3][3] = {}, jba[3][3] = {}, jbb[3][3] = {};
    for (int q = 0; q < kNQ; ++q) {
      const double aq = kQB[q][0] * a0 + kQB[q][1] * a1 + kQB[q][2] * a2;
      const double bq = kQB[q][0] * b0 + kQB[q][1] * b1 + kQB[q][2] * b2;
      const double wa = kQW[q] * g.area;
      const double fa = model.f_a(aq, bq, alpha), fb = model.f_b(aq, bq, alpha);
      const double ga = model.g_a(aq, bq, alpha), gb2 = model.g_b(aq, bq, alpha);
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
          const double phij = wa * kQB[q][i] * kQB[q][j];
          jaa[i][j] += phij * fa;
          jab[i][j] += phij * fb;
          jba[i][j] += phij * ga;
          jbb[i][j] += phij * gb2;
        }
    }
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        const double kij = g.area * g.grad[i].dot(g.grad[j]);
        jaa[i][j] -= d1 * kij;
        jbb[i][j] -= d2 * kij;
        if (chi != 0.0) {
          jaa[i][j] += chi * (g.area / 3.0) * gb.dot(g.grad[i]);
          jab[i][j] += chi * g.area * amean * g.grad[j].dot(g.grad[i]);
        }
      }

    const size_t base = size_t(t) * 36;
    size_t idx = base;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        const int ri = s.vertex_to_dof[size_t(tri[i])];
        const int cj = s.vertex_to_dof[size_t(tri[j])];
        const bool keep = ri >= 0 && cj >= 0;
        const int r = keep ? ri : 0, c = keep ? cj : 0;
        trips[idx++] = Triplet(r, c, keep ? jaa[i][j] : 0.0);
        trips[idx++] = Triplet(r, n + c, keep ? jab[i][j] : 0.0);
        trips[idx++] = Triplet(n + r, c, keep ? jba[i][j] : 0.0);
        trips[idx++] = Triplet(n + r, n + c, keep ? jbb[i][j] : 0.0);
      }
  }
  SpMat jac(2 * n, 2 * n);
  jac.setFromTriplets(trips.begin(), trips.end());
  jac.prune(0.0, 0.0);
  return jac;
}

Vec residual_alpha_derivative(const FemSpace& s, const RDModel& model,
                              const Vec& x, double alpha, double h) {
  const double step = h * std::max(1.0, std::abs(alpha));
  const Vec rp = assemble_residual(s, model, x, alpha + step);
  const Vec rm = assemble_residual(s, model, x, alpha - step);
  return (rp - rm) / (2 * step);
}

void save_matrix_market(const SpMat& m, const std::string& path) {
  std::FILE* fp = std::fopen(path.c_str(), "w");
  if (!fp) throw std::runtime_error("cannot open " + path);
  std::fprintf(fp, "%%%%MatrixMarket matrix coordinate real general\n");
  std::fprintf(fp, "%ld %ld %ld\n", long(m.rows()), long(m.cols()),
               long(m.nonZeros()));
  for (int c = 0; c < m.outerSize(); ++c)
    for (SpMat::InnerIterator it(m, c); it; ++it)
      std::fprintf(fp, "%ld %ld %.17g\n", long(it.row()) + 1, long(it.col()) + 1,
                   it.value());
  std::fclose(fp);
}

SpMat load_matrix_market(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || line.rfind("%%MatrixMarket", 0) != 0)
    throw std::runtime_error("not a MatrixMarket file: " + path);
  do {
    if (!std::getline(in, line)) throw std::runtime_error("truncated: " + path);
  } while (!line.empty() && line[0] == '%');
  std::istringstream hdr(line);
  long rows = 0, cols = 0, nnz = 0;
  hdr >> rows >> cols >> nnz;
  std::vector<Triplet> trips;
  trips.reserve(size_t(nnz));
  for (long k = 0; k < nnz; ++k) {
    long r = 0, c = 0;
    double v = 0;
    in >> r >> c >> v;
    if (!in) throw std::runtime_error("truncated: " + path);
    trips.emplace_back(int(r - 1), int(c - 1), v);
  }
  SpMat m(rows, cols);
  m.setFromTriplets(trips.begin(), trips.end());
  return m;
}

}  // namespace rdsurf
