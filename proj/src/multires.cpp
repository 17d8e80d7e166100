#include "rdsurf/multires.hpp"

#include <Eigen/SparseLU>
#include <chrono>
#include <cmath>
#include <fstream>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace rdsurf {

namespace {

double now_seconds() {
  using clock = std::chrono::steady_clock;
  return std::chrono::duration<double>(clock::now().time_since_epoch()).count();
}

double pattern_correlation(const Vec& a, const Vec& b) {
  const Vec ac = a.array() - a.mean();
  const Vec bc = b.array() - b.mean();
  double na = ac.norm(), nb = bc.norm();
  if (na < 1e-14 || nb < 1e-14) return 1.0;  // both homogeneous
  return ac.dot(bc) / (na * nb);
}

void attach_hop(MeshHierarchy& h, int hop) {
  const SurfaceMesh& coarse = *h.meshes[size_t(hop)];
  const SurfaceMesh& fine = *h.meshes[size_t(hop) + 1];
  std::vector<std::array<int, 2>> mids;
  auto refined = std::make_unique<SurfaceMesh>(subdivide(coarse, &mids));
  h.midpoints.push_back(std::move(mids));
  h.project.push_back(build_interpolation(*refined, fine));
  bool ident = refined->n_vertices() == fine.n_vertices() &&
               h.project.back().is_identity();
  h.project_is_identity.push_back(char(ident));
  if (!ident) h.refined_spaces.push_back(make_fem_space(*refined, h.bc));
  else h.refined_spaces.push_back(FemSpace{});
  h.refined.push_back(std::move(refined));
}

const FemSpace& hop_a_space(const MeshHierarchy& h, int level) {
  return h.project_is_identity[size_t(level) - 1]
             ? h.spaces[size_t(level)]
             : h.refined_spaces[size_t(level) - 1];
}

struct CorrectorOut {
  Vec x;
  int iterations = 0;
  double residual = 0;
  bool used_trust_region = false;
  bool ok = false;
};

// dogleg trust-region minimization of |r|^2/2, fallback for hard hops
CorrectorOut trust_region_correct(const FemSpace& space, const RDModel& model,
                                  const Vec& x0, double alpha,
                                  const NewtonOptions& opts) {
  CorrectorOut out;
  out.used_trust_region = true;
  Vec x = x0;
  double radius = std::max(0.1 * x0.norm(), 1e-3);
  const double rms_scale = std::sqrt(double(x.size()));
  Vec r = assemble_residual(space, model, x, alpha);
  for (int iter = 0; iter < 4 * opts.max_iters; ++iter) {
    out.iterations = iter;
    if (r.norm() / rms_scale <= opts.tol) {
      out.x = x;
      out.residual = r.norm() / rms_scale;
      out.ok = true;
      return out;
    }
    SpMat J = assemble_jacobian(space, model, x, alpha);
    Eigen::SparseLU<SpMat> lu(J);
    Vec pn;
    bool have_newton = lu.info() == Eigen::Success;
    if (have_newton) {
      pn = lu.solve(-r);
      have_newton = lu.info() == Eigen::Success && pn.allFinite();
    }
    Vec g = J.transpose() * r;
    Vec Jg = J * g;
    double gg = g.squaredNorm();
    if (!(Jg.squaredNorm() > 0)) break;
    Vec pc = -(gg / Jg.squaredNorm()) * g;
    Vec p;
    if (have_newton && pn.norm() <= radius) {
      p = pn;
    } else if (!have_newton || pc.norm() >= radius) {
      p = (radius / pc.norm()) * pc;
    } else {
      // dogleg segment pc -> pn clipped to the radius
      Vec d = pn - pc;
      double a = d.squaredNorm();
      double b = 2 * pc.dot(d);
      double cq = pc.squaredNorm() - radius * radius;
      double tau = (-b + std::sqrt(std::max(0.0, b * b - 4 * a * cq))) / (2 * a);
      p = pc + tau * d;
    }
    double f0 = 0.5 * r.squaredNorm();
    Vec lin = r + J * p;
    double pred = f0 - 0.5 * lin.squaredNorm();
    Vec rn = assemble_residual(space, model, x + p, alpha);
    double actual = f0 - 0.5 * rn.squaredNorm();
    double rho = pred > 0 ? actual / pred : -1.0;
    if (rho > 1e-4) {
      x += p;
      r = rn;
    }
    if (rho < 0.25) radius *= 0.25;
    else if (rho > 0.75 && p.norm() > 0.8 * radius)
      radius = std::min(2.0 * radius, 1e6);
    if (radius < 1e-14) break;
  }
  out.residual = r.norm() / rms_scale;
  return out;
}

CorrectorOut correct(const FemSpace& space, const RDModel& model,
                     const Vec& x0, double alpha, const NewtonOptions& opts) {
  try {
    NewtonResult nr = newton_correct(space, model, x0, alpha, opts);
    return {nr.x, nr.iterations, nr.residual_rms, false, true};
  } catch (const ContinuationError&) {
  }
  return trust_region_correct(space, model, x0, alpha, opts);
}

}  // namespace

MeshHierarchy build_hierarchy(const SurfaceMesh& fine, int n_levels, BC bc,
                              double coarsening_ratio, int min_triangles) {
  if (n_levels < 0 || coarsening_ratio <= 1.0)
    throw MultiresError("build_hierarchy: invalid level count or ratio");
  if (double(fine.n_triangles()) <
      std::pow(coarsening_ratio, n_levels) * min_triangles)
    throw MultiresError("build_hierarchy: fine mesh too small for " +
                        std::to_string(n_levels) + " levels");
  MeshHierarchy h;
  h.bc = bc;
  std::vector<std::unique_ptr<SurfaceMesh>> down;
  down.push_back(std::make_unique<SurfaceMesh>(fine));
  for (int l = 0; l < n_levels; ++l) {
    int target = int(std::llround(double(down.back()->n_triangles()) /
                                  coarsening_ratio));
    down.push_back(std::make_unique<SurfaceMesh>(decimate(*down.back(), target)));
  }
  for (auto it = down.rbegin(); it != down.rend(); ++it)
    h.meshes.push_back(std::move(*it));
  for (size_t l = 1; l < h.meshes.size(); ++l)
    if (h.meshes[l]->n_triangles() <= h.meshes[l - 1]->n_triangles())
      throw MultiresError("build_hierarchy: triangle counts not increasing");
  for (auto& m : h.meshes) h.spaces.push_back(make_fem_space(*m, bc));
  for (int l = 0; l < h.n_hops(); ++l) attach_hop(h, l);
  return h;
}

MeshHierarchy build_hierarchy_by_subdivision(const SurfaceMesh& coarse,
                                             int n_levels, BC bc) {
  if (n_levels < 0)
    throw MultiresError("build_hierarchy_by_subdivision: invalid level count");
  MeshHierarchy h;
  h.bc = bc;
  h.meshes.push_back(std::make_unique<SurfaceMesh>(coarse));
  for (int l = 0; l < n_levels; ++l) {
    std::vector<std::array<int, 2>> mids;
    auto next = std::make_unique<SurfaceMesh>(subdivide(*h.meshes.back(), &mids));
    h.midpoints.push_back(std::move(mids));
    h.meshes.push_back(std::move(next));
  }
  for (auto& m : h.meshes) h.spaces.push_back(make_fem_space(*m, bc));
  for (int l = 0; l < h.n_hops(); ++l) {
    h.refined.push_back(nullptr);  // R_{l-1} is L_l itself
    h.refined_spaces.push_back(FemSpace{});
    InterpolationMap ident;
    ident.n_source = h.meshes[size_t(l) + 1]->n_vertices();
    ident.rows.resize(size_t(ident.n_source));
    for (int v = 0; v < ident.n_source; ++v)
      ident.rows[size_t(v)] = {{{v, 1.0}, {-1, 0.0}, {-1, 0.0}}};
    h.project.push_back(std::move(ident));
    h.project_is_identity.push_back(1);
  }
  return h;
}

Vec prolong_state(const MeshHierarchy& h, int level, const RDModel& model,
                  const Vec& x, double alpha) {
  if (level < 1 || level > h.n_hops())
    throw MultiresError("prolong_state: level out of range");
  const FemSpace& src = h.spaces[size_t(level) - 1];
  const FemSpace& dst = hop_a_space(h, level);
  const auto hs = model.primary_state(alpha);
  const double ba = src.bc == BC::DirichletZero ? hs.a0 : 0.0;
  const double bb = src.bc == BC::DirichletZero ? hs.b0 : 0.0;
  const int n = src.n_dof;
  Vec av = expand_field(src, x.head(n), ba);
  Vec bv = expand_field(src, x.tail(n), bb);
  const auto& mids = h.midpoints[size_t(level) - 1];
  const int n_old = int(av.size());
  Vec afine(n_old + int(mids.size()));
  Vec bfine(n_old + int(mids.size()));
  afine.head(n_old) = av;
  bfine.head(n_old) = bv;
  for (size_t j = 0; j < mids.size(); ++j) {
    afine[n_old + int(j)] = 0.5 * (av[mids[j][0]] + av[mids[j][1]]);
    bfine[n_old + int(j)] = 0.5 * (bv[mids[j][0]] + bv[mids[j][1]]);
  }
  Vec out(2 * dst.n_dof);
  out.head(dst.n_dof) = restrict_field(dst, afine);
  out.tail(dst.n_dof) = restrict_field(dst, bfine);
  return out;
}

std::pair<Vec, UpsampleReport> upsample_solution(const MeshHierarchy& h,
                                                 int level, const Vec& x,
                                                 double alpha,
                                                 const RDModel& model,
                                                 const NewtonOptions& opts) {
  UpsampleReport report;
  const bool ident = h.project_is_identity[size_t(level) - 1] != 0;
  const FemSpace& space_a = hop_a_space(h, level);

  Vec guess = prolong_state(h, level, model, x, alpha);
  Vec xh = homogeneous_state_vector(space_a, model, alpha);
  double t0 = now_seconds();
  CorrectorOut ca = correct(space_a, model, guess, alpha, opts);
  HopReport ha;
  ha.level = level;
  ha.hop = 0;
  ha.iterations = ca.iterations;
  ha.seconds = now_seconds() - t0;
  ha.residual = ca.residual;
  ha.used_trust_region = ca.used_trust_region;
  if (ca.ok) ha.correlation = pattern_correlation(ca.x - xh, guess - xh);
  report.hops.push_back(ha);
  if (!ca.ok) {
    report.success = false;
    report.note = "subdivide-resolve hop failed at level " +
                  std::to_string(level);
    return {Vec(), report};
  }
  if (ident) return {ca.x, report};

  const FemSpace& space_b = h.spaces[size_t(level)];
  const auto hs = model.primary_state(alpha);
  const double ba = space_a.bc == BC::DirichletZero ? hs.a0 : 0.0;
  const double bb = space_a.bc == BC::DirichletZero ? hs.b0 : 0.0;
  const auto& map = h.project[size_t(level) - 1];
  Vec av = map.apply(expand_field(space_a, ca.x.head(space_a.n_dof), ba));
  Vec bv = map.apply(expand_field(space_a, ca.x.tail(space_a.n_dof), bb));
  Vec guess_b(2 * space_b.n_dof);
  guess_b.head(space_b.n_dof) = restrict_field(space_b, av);
  guess_b.tail(space_b.n_dof) = restrict_field(space_b, bv);
  Vec xhb = homogeneous_state_vector(space_b, model, alpha);
  t0 = now_seconds();
  CorrectorOut cb = correct(space_b, model, guess_b, alpha, opts);
  HopReport hb;
  hb.level = level;
  hb.hop = 1;
  hb.iterations = cb.iterations;
  hb.seconds = now_seconds() - t0;
  hb.residual = cb.residual;
  hb.used_trust_region = cb.used_trust_region;
  if (cb.ok) hb.correlation = pattern_correlation(cb.x - xhb, guess_b - xhb);
  report.hops.push_back(hb);
  if (!cb.ok) {
    report.success = false;
    report.note = "project-resolve hop failed at level " +
                  std::to_string(level);
    return {Vec(), report};
  }
  return {cb.x, report};
}

BranchUpsampleResult upsample_branch(const MeshHierarchy& h,
                                     const Branch& branch,
                                     const std::vector<int>& subset,
                                     const RDModel& model, int parallel_width,
                                     const NewtonOptions& opts) {
  for (int i : subset)
    if (i < 0 || i >= int(branch.states.size()))
      throw MultiresError("upsample_branch: subset index out of range");
  BranchUpsampleResult res;
  res.subset = subset;
  const int ns = int(subset.size());
  const int nl = h.n_hops();
  res.alphas.resize(size_t(ns));
  res.states.assign(size_t(nl), std::vector<Vec>(size_t(ns)));
  res.reports.assign(size_t(nl), std::vector<UpsampleReport>(size_t(ns)));
  std::vector<std::string> notes(static_cast<size_t>(ns));

#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic) num_threads(std::max(1, parallel_width))
#else
  (void)parallel_width;
#endif
  for (int j = 0; j < ns; ++j) {
    const BranchState& st = branch.states[size_t(subset[size_t(j)])];
    res.alphas[size_t(j)] = st.alpha;
    Vec x = st.x;
    for (int l = 1; l <= nl; ++l) {
      auto [xl, rep] = upsample_solution(h, l, x, st.alpha, model, opts);
      res.reports[size_t(l) - 1][size_t(j)] = rep;
      if (!rep.success) {
        notes[size_t(j)] = "state " + std::to_string(subset[size_t(j)]) +
                           ": " + rep.note;
        break;
      }
      res.states[size_t(l) - 1][size_t(j)] = std::move(xl);
      x = res.states[size_t(l) - 1][size_t(j)];
    }
  }
  for (auto& n : notes)
    if (!n.empty()) res.failures.push_back(n);
  return res;
}

void save_reports_csv(const BranchUpsampleResult& result,
                      const std::string& path) {
  std::ofstream out(path);
  if (!out) throw MultiresError("cannot open " + path);
  out << "state,level,hop,iters,seconds,residual,correlation\n";
  char buf[256];
  for (size_t l = 0; l < result.reports.size(); ++l)
    for (size_t j = 0; j < result.reports[l].size(); ++j)
      for (const HopReport& hr : result.reports[l][j].hops) {
        std::snprintf(buf, sizeof(buf), "%d,%d,%d,%d,%.17g,%.17g,%.17g\n",
                      result.subset[j], hr.level, hr.hop, hr.iterations,
                      hr.seconds, hr.residual, hr.correlation);
        out << buf;
      }
}

void save_hierarchy(const MeshHierarchy& h, const std::string& dir,
                    const std::string& prefix) {
  std::ofstream manifest(dir + "/" + prefix + "_manifest.txt");
  if (!manifest) throw MultiresError("cannot open hierarchy manifest");
  for (size_t l = 0; l < h.meshes.size(); ++l) {
    std::string mesh_path = dir + "/" + prefix + "_L" + std::to_string(l) + ".off";
    save_off(*h.meshes[l], mesh_path);
    std::string map_path = "-";
    if (l > 0 && !h.project_is_identity[l - 1]) {
      map_path = dir + "/" + prefix + "_map" + std::to_string(l) + ".csv";
      save_interpolation_csv(h.project[l - 1], map_path);
    }
    manifest << "level " << l << " mesh " << mesh_path << " dofs "
             << h.spaces[l].n_dof << " map " << map_path << "\n";
  }
}

}  // namespace rdsurf
