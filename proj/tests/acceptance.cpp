// End-to-end acceptance checks, one pass/fail line per criterion.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>

#include "rdsurf/continuation.hpp"
#include "rdsurf/multires.hpp"
#include "rdsurf/simulate.hpp"

using namespace rdsurf;

namespace {

const double kPi = 3.14159265358979323846;
int failures = 0;

void report(int num, const char* what, bool ok) {
  std::printf("[%s] criterion %2d: %s\n", ok ? "PASS" : "FAIL", num, what);
  std::fflush(stdout);
  if (!ok) ++failures;
}

bool guard(int num, const char* what, bool (*fn)()) {
  bool ok = false;
  try {
    ok = fn();
  } catch (const std::exception& e) {
    std::printf("  exception: %s\n", e.what());
  }
  report(num, what, ok);
  return ok;
}

double correlation(const Vec& a, const Vec& b) {
  const Vec ac = a.array() - a.mean();
  const Vec bc = b.array() - b.mean();
  return ac.dot(bc) / (ac.norm() * bc.norm());
}

struct RectangleSetup {
  SurfaceMesh mesh;
  FemSpace space;
  EigenBasis basis;
};

RectangleSetup& rect_fine() {  // ~4400 dofs
  static RectangleSetup s = [] {
    RectangleSetup r;
    r.mesh = generate_rectangle(1, 4, 32, 128);
    r.space = make_fem_space(r.mesh, BC::NeumannZero);
    EigenOptions eo;
    eo.k = 24;
    r.basis = solve_eigenbasis(assemble_stiffness(r.space),
                               assemble_mass(r.space), eo);
    return r;
  }();
  return s;
}

RectangleSetup& rect_coarse() {  // the branch-tracing mesh
  static RectangleSetup s = [] {
    RectangleSetup r;
    r.mesh = generate_rectangle(1, 4, 16, 64);
    r.space = make_fem_space(r.mesh, BC::NeumannZero);
    EigenOptions eo;
    eo.k = 12;
    r.basis = solve_eigenbasis(assemble_stiffness(r.space),
                               assemble_mass(r.space), eo);
    return r;
  }();
  return s;
}

int mode_near(const EigenBasis& basis, double lambda) {
  int best = -1;
  double dist = 1e300;
  for (size_t i = 1; i < basis.pairs.size(); ++i)
    if (std::abs(basis.pairs[i].lambda - lambda) < dist) {
      dist = std::abs(basis.pairs[i].lambda - lambda);
      best = int(i);
    }
  return best;
}

// --- 1: rectangle spectrum against the separable cosine eigenvalues

bool crit1() {
  auto t0 = std::chrono::steady_clock::now();
  const auto& r = rect_fine();
  std::vector<double> exact;
  for (int p = 0; p <= 6; ++p)
    for (int q = 0; q <= 24; ++q)
      if (p + q > 0) exact.push_back(kPi * kPi * (p * p + q * q / 16.0));
  std::sort(exact.begin(), exact.end());
  bool ok = r.space.n_dof > 4000 && r.space.n_dof < 5000;
  for (int i = 1; i <= 20; ++i) {
    double rel = std::abs(r.basis.pairs[size_t(i)].lambda - exact[size_t(i - 1)]) /
                 exact[size_t(i - 1)];
    if (rel > 0.01) {
      std::printf("  eigenvalue %d off by %.2e\n", i, rel);
      ok = false;
    }
  }
  double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::printf("  %d dofs, 20 eigenvalues in %.1f s\n", r.space.n_dof, sec);
  return ok && sec < 120.0;
}

// --- 2: coincident simple and multiple points at 17.574

bool crit2() {
  const auto& r = rect_fine();
  auto model = make_murray();
  auto [p1, pat1] = compose_simple(r.basis, 1, *model);
  int g2 = -1;
  for (size_t g = 0; g < r.basis.groups.size(); ++g)
    if (r.basis.groups[g].size() == 2 &&
        std::abs(r.basis.pairs[size_t(r.basis.groups[g][0])].lambda - kPi * kPi) <
            0.05 * kPi * kPi)
      g2 = int(g);
  if (g2 < 0) return false;
  auto [p2, pat2] = compose_multiple(r.basis, r.basis.groups[size_t(g2)],
                                     {1.0, 1.0}, *model);
  std::printf("  simple %.5f, multiple %.5f (target 17.574)\n", p1.alpha, p2.alpha);
  return std::abs(p1.alpha - 17.574) < 0.005 * 17.574 &&
         std::abs(p2.alpha - 17.574) < 0.005 * 17.574;
}

// --- 3: branch origin for the third transverse mode

bool crit3() {
  const auto& r = rect_coarse();
  auto model = make_murray();
  int idx = mode_near(r.basis, 9 * kPi * kPi / 16);
  auto [point, pat] = compose_simple(r.basis, idx, *model);
  std::printf("  mode (0,3) point %.5f (target 13.736)\n", point.alpha);
  return std::abs(point.alpha - 13.736) < 0.005 * 13.736;
}

// --- 4: Brusselator onset values on the spherical cap

bool crit4() {
  auto mesh = generate_spherical_cap(1.0, 0.5, 37);
  auto space = make_fem_space(mesh, BC::DirichletZero);
  auto model = make_brusselator();
  EigenOptions eo;
  eo.k = 40;
  auto basis = solve_eigenbasis(assemble_stiffness(space), assemble_mass(space), eo);
  std::vector<std::pair<double, double>> onsets;  // (A*, lambda), descending A*
  for (const auto& p : basis.pairs) {
    auto a = model->continuation_closed_form(p.lambda);
    if (a) onsets.push_back({*a, p.lambda});
  }
  std::sort(onsets.begin(), onsets.end(),
            [](const auto& x, const auto& y) { return x.first > y.first; });
  std::vector<double> top;  // azimuthal pairs collapse to one entry
  for (const auto& p : onsets)
    if (top.empty() || std::abs(p.first - top.back()) > 1e-4) top.push_back(p.first);
  const double reference[7] = {0.76520, 0.76382, 0.76171, 0.76049,
                               0.75552, 0.75406, 0.74744};
  if (top.size() < 7) return false;
  bool ok = space.n_dof > 3800 && space.n_dof < 4800;
  for (int i = 0; i < 7; ++i) {
    double rel = std::abs(top[size_t(i)] - reference[i]) / reference[i];
    std::printf("  onset %d: %.5f vs %.5f (rel %.1e)\n", i, top[size_t(i)],
                reference[i], rel);
    if (rel > 5e-3) ok = false;
    if (i == 0 && rel > 2e-3) ok = false;
  }
  return ok;
}

// --- 5: composed points satisfy the scalar constraint rows and have zero growth

bool check_point(const BifurcationPoint& point, const BifurcationPattern& pat,
                 const RDModel& model, size_t n_first) {
  auto h = model.primary_state(point.alpha);
  auto c = model.linearize(h.a0, h.b0, point.alpha);
  const double kscale =
      std::max({std::abs(c.uKu), std::abs(c.uKv), std::abs(c.vKu), std::abs(c.vKv)});
  for (double lam : point.lambdas)
    if (std::abs(growth_rate(c, lam)) > 1e-8) return false;
  for (size_t i = 0; i < pat.coefficients.size(); ++i) {
    double lam = point.lambdas[(point.kind == BifKind::Mixed && i >= n_first) ? 1 : 0];
    auto [u, v] = pat.coefficients[i];
    double scale = kscale * std::max({std::abs(u), std::abs(v), 1e-30});
    double r1 = (c.uKu - c.uDu * lam) * u + (c.uKv - c.uDv * lam) * v;
    double r2 = (c.vKu - c.vDu * lam) * u + (c.vKv - c.vDv * lam) * v;
    if (std::max(std::abs(r1), std::abs(r2)) > 1e-6 * scale) return false;
  }
  return true;
}

bool crit5() {
  const auto& r = rect_coarse();
  auto model = make_murray();
  bool ok = true;
  for (int idx : {1, 2, 3, 6}) {
    auto [point, pat] = compose_simple(r.basis, idx, *model);
    ok = ok && check_point(point, pat, *model, 1);
  }
  int g2 = -1;
  for (size_t g = 0; g < r.basis.groups.size(); ++g)
    if (r.basis.groups[g].size() == 2 &&
        std::abs(r.basis.pairs[size_t(r.basis.groups[g][0])].lambda - kPi * kPi) <
            0.05 * kPi * kPi)
      g2 = int(g);
  if (g2 < 0) return false;
  const auto& grp = r.basis.groups[size_t(g2)];
  auto [pm, patm] = compose_multiple(r.basis, grp, {1.0, 1.0}, *model);
  ok = ok && check_point(pm, patm, *model, grp.size());
  auto [px, patx] = compose_mixed(r.basis, {1}, {grp[0]}, {1.0}, {1.0}, *model);
  ok = ok && check_point(px, patx, *model, 1);
  return ok;
}

// --- 6: analytic Jacobian against central differences

SpMat fd_jacobian(const FemSpace& space, const RDModel& model, const Vec& x,
                  double alpha) {
  const int n = int(x.size());
  std::vector<Eigen::Triplet<double>> trips;
  for (int j = 0; j < n; ++j) {
    const double h = 1e-5 * std::max(1.0, std::abs(x[j]));
    Vec xp = x, xm = x;
    xp[j] += h;
    xm[j] -= h;
    Vec col = (assemble_residual(space, model, xp, alpha) -
               assemble_residual(space, model, xm, alpha)) /
              (2 * h);
    for (int i = 0; i < n; ++i)
      if (col[i] != 0) trips.emplace_back(i, j, col[i]);
  }
  SpMat J(n, n);
  J.setFromTriplets(trips.begin(), trips.end());
  return J;
}

bool crit6() {
  std::mt19937 rng(2024);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  bool ok = true;
  for (int mi = 0; mi < 2; ++mi) {
    SurfaceMesh mesh = mi == 0 ? generate_rectangle(1, 2, 8, 16)
                               : generate_spherical_cap(1.0, 0.5, 6);
    for (auto model : {make_murray(), make_brusselator()}) {
      auto space = make_fem_space(mesh, model->boundary_condition());
      const double alpha = model->name() == "murray" ? 14.0 : 0.6;
      Vec xh = homogeneous_state_vector(space, *model, alpha);
      for (int s = 0; s < 10; ++s) {
        Vec x = xh;
        for (int i = 0; i < x.size(); ++i) x[i] *= 1.0 + 0.2 * unit(rng);
        SpMat J = assemble_jacobian(space, *model, x, alpha);
        SpMat D = J - fd_jacobian(space, *model, x, alpha);
        double rel = D.norm() / J.norm();
        if (rel > 1e-6) {
          std::printf("  mesh %d %s state %d: rel %.2e\n", mi,
                      model->name().c_str(), s, rel);
          ok = false;
        }
      }
    }
  }
  return ok;
}

// --- 7: traced branch states are integrator fixed points

bool crit7() {
  const auto& r = rect_coarse();
  auto model = make_murray();
  int idx = mode_near(r.basis, 9 * kPi * kPi / 16);
  auto [point, pat] = compose_simple(r.basis, idx, *model);
  auto branch = trace_branch(r.space, *model, point, pat, 0.01, 10.0, 30.0, 30);
  if (branch.states.size() < 30) {
    std::printf("  only %zu steps (%s)\n", branch.states.size(),
                branch.failure_note.c_str());
    return false;
  }
  for (const auto& st : branch.states)
    if (st.residual_rms > 1e-8) return false;
  const double dt = std::min(1e-3, 0.5 * imex_dt_bound(*model, point.alpha));
  for (size_t i : {size_t(7), size_t(17), size_t(27)}) {
    const auto& st = branch.states[i];
    Vec x1 = imex_step(r.space, *model, st.x, st.alpha, dt);
    double rel = (x1 - st.x).norm() / st.x.norm();
    if (rel > 1e-8) {
      std::printf("  state %zu moved %.2e\n", i, rel);
      return false;
    }
  }
  return true;
}

// --- 8: time integration decays below onset, locks onto the first mode above

bool crit8() {
  const auto& r = rect_coarse();
  auto model = make_murray();
  double alpha_b = 1e300;
  int first = -1;
  for (size_t i = 1; i < r.basis.pairs.size(); ++i) {
    auto a = model->continuation_closed_form(r.basis.pairs[i].lambda);
    if (a && *a < alpha_b) {
      alpha_b = *a;
      first = int(i);
    }
  }
  const Vec& phi = r.basis.pairs[size_t(first)].vector;
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  auto perturbed = [&](double alpha) {
    Vec x = homogeneous_state_vector(r.space, *model, alpha);
    for (int i = 0; i < r.space.n_dof; ++i) {
      double d = 0.01 * phi[i] + 0.002 * unit(rng);
      x[i] += d;
      x[r.space.n_dof + i] += d;
    }
    return x;
  };

  const double below = 0.99 * alpha_b, above = 1.05 * alpha_b;
  IntegratorConfig cfg;
  cfg.t_max = 4000.0;
  cfg.steady_tol = 1e-8;

  cfg.dt = 0.3 * imex_dt_bound(*model, below);
  auto rb = integrate_to_steady(r.space, *model, perturbed(below), below, cfg);
  Vec xh = homogeneous_state_vector(r.space, *model, below);
  bool decayed = rb.outcome == SteadyOutcome::Steady &&
                 (rb.x - xh).cwiseAbs().maxCoeff() < 1e-4;

  cfg.dt = 0.3 * imex_dt_bound(*model, above);
  auto ra = integrate_to_steady(r.space, *model, perturbed(above), above, cfg);
  double corr = correlation(ra.x.head(r.space.n_dof), phi);
  std::printf("  below: max dev %.1e; above: mode correlation %.3f\n",
              (rb.x - xh).cwiseAbs().maxCoeff(), corr);

  auto hb = model->primary_state(below);
  auto ha = model->primary_state(above);
  const double lam = r.basis.pairs[size_t(first)].lambda;
  bool dispersion_consistent =
      growth_rate(model->linearize(hb.a0, hb.b0, below), lam) < 0 &&
      growth_rate(model->linearize(ha.a0, ha.b0, above), lam) > 0;
  return decayed && ra.outcome == SteadyOutcome::Steady &&
         std::abs(corr) >= 0.8 && dispersion_consistent;
}

// --- 9: upsampling effort across a three-level hierarchy

bool crit9() {
  auto fine = generate_rectangle(1, 4, 64, 256);
  auto model = make_murray();
  auto hier = build_hierarchy(fine, 2, BC::NeumannZero);
  EigenOptions eo;
  eo.k = 8;
  const auto& s0 = hier.spaces[0];
  auto basis = solve_eigenbasis(assemble_stiffness(s0), assemble_mass(s0), eo);
  int idx = mode_near(basis, 9 * kPi * kPi / 16);
  auto [point, pat] = compose_simple(basis, idx, *model);
  auto branch = trace_branch(s0, *model, point, pat, 0.01, 10.0, 30.0, 30);
  if (branch.states.size() < 30) return false;

  std::vector<int> subset = {4, 9, 14, 19, 24, 29};
  auto res = upsample_branch(hier, branch, subset, *model, 1);
  if (!res.failures.empty()) return false;
  double total_iters = 0;
  std::vector<double> t1, t2;
  for (size_t j = 0; j < subset.size(); ++j)
    for (size_t l = 0; l < res.reports.size(); ++l)
      for (const auto& h : res.reports[l][j].hops) {
        total_iters += h.iterations;
        if (h.iterations >= 1)
          (h.level == 1 ? t1 : t2).push_back(h.seconds / h.iterations);
      }
  const double avg = total_iters / double(subset.size());
  auto median = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v[v.size() / 2];
  };
  const double exponent =
      std::log(median(t2) / median(t1)) /
      std::log(double(hier.spaces[2].n_dof) / hier.spaces[1].n_dof);
  std::printf("  dofs %d/%d/%d, avg iterations per pattern %.2f, "
              "time exponent %.2f\n",
              hier.spaces[0].n_dof, hier.spaces[1].n_dof, hier.spaces[2].n_dof,
              avg, exponent);
  return avg >= 4.0 && avg <= 10.0 && exponent >= 1.0 && exponent <= 1.5;
}

// --- 10: distinct mixed-mode failure types

struct BadCrossModel final : RDModel {
  std::string name() const override { return "bad_cross"; }
  std::vector<std::string> parameter_names() const override { return {"alpha"}; }
  double parameter(const std::string&) const override { return 1.0; }
  ModelPtr with_parameter(const std::string&, double) const override {
    return std::make_shared<BadCrossModel>();
  }
  std::string continuation_parameter() const override { return "alpha"; }
  BC boundary_condition() const override { return BC::NeumannZero; }
  double f(double a, double b, double alpha) const override { return -a + alpha * b; }
  double g(double, double b, double) const override { return -b; }
  double f_a(double, double, double) const override { return -1; }
  double f_b(double, double, double alpha) const override { return alpha; }
  double g_a(double, double, double) const override { return 0; }
  double g_b(double, double, double) const override { return -1; }
  double D1(double) const override { return 0.5; }
  double D2(double) const override { return 0.5; }
  std::vector<HomogeneousState> homogeneous_states(double) const override {
    return {{0.0, 0.0, true}};
  }
  LinearCoefficients linearize(double, double, double alpha) const override {
    LinearCoefficients c;
    c.uDu = 0.5;
    c.vDv = 0.5;
    c.uDv = 1.0;  // uDu vDv < uDv vDu
    c.vDu = 1.0;
    c.uKu = -1;
    c.vKv = -1;
    c.uKv = alpha;
    c.vKu = 0;
    return c;
  }
  bool linearization_affine_in_alpha() const override { return true; }
};

bool crit10() {
  EigenBasis fake;
  for (double lam : {1.0, 5.0}) {
    EigenPair p;
    p.lambda = lam;
    p.vector = Vec::Ones(4);
    fake.pairs.push_back(p);
  }
  fake.groups = {{0}, {1}};
  bool diffusion_guard = false;
  try {
    BadCrossModel bad;
    compose_mixed(fake, {0}, {1}, {1.0}, {1.0}, bad);
  } catch (const DiffusionConstraintError&) {
    diffusion_guard = true;
  } catch (const BifurcationError&) {
  }

  // a pair whose eigenvalue product the model cannot realise with a real
  // parameter value
  const auto& r = rect_coarse();
  bool no_real_guard = false;
  try {
    compose_mixed(r.basis, {1}, {2}, {1.0}, {1.0}, *make_murray());
  } catch (const NoRealSolutionError&) {
    no_real_guard = true;
  } catch (const BifurcationError&) {
  }
  std::printf("  diffusion guard %d, no-real-solution guard %d\n",
              int(diffusion_guard), int(no_real_guard));
  return diffusion_guard && no_real_guard;
}

// --- 11: full pipeline on a user-style mesh loaded from disk

bool crit11() {
  SurfaceMesh ell = generate_icosphere(4);
  for (auto& p : ell.vertices) {
    p.x() *= 1.25;
    p.z() *= 0.8;
  }
  save_off(ell, "acceptance_user.off");
  SurfaceMesh mesh = load_mesh("acceptance_user.off");
  if (mesh.n_triangles() < 5000) return false;

  auto model = make_murray();
  auto space = make_fem_space(mesh, BC::NeumannZero);
  EigenOptions eo;
  eo.k = 8;
  auto basis = solve_eigenbasis(assemble_stiffness(space), assemble_mass(space), eo);

  std::vector<BifurcationPoint> inventory;
  BifurcationPoint origin;
  BifurcationPattern pattern;
  double alpha_min = 1e300;
  for (int i = 1; i < eo.k; ++i) {
    try {
      auto [point, pat] = compose_simple(basis, i, *model);
      if (!std::isfinite(point.alpha) || point.alpha <= 0) return false;
      inventory.push_back(point);
      if (point.alpha < alpha_min) {
        alpha_min = point.alpha;
        origin = point;
        pattern = pat;
      }
    } catch (const BifurcationError&) {
    }
  }
  if (inventory.empty()) return false;
  save_inventory_csv(inventory, "acceptance_user_inventory.csv");

  auto branch = trace_branch(space, *model, origin, pattern, 0.01, 5.0, 30.0, 12);
  std::printf("  %d tris, %zu points, branch from %.3f with %zu steps\n",
              mesh.n_triangles(), inventory.size(), origin.alpha,
              branch.states.size());
  if (branch.states.size() < 8) return false;
  for (const auto& st : branch.states)
    if (st.residual_rms > 1e-8) return false;

  auto hier = build_hierarchy_by_subdivision(mesh, 1, BC::NeumannZero);
  auto res = upsample_branch(hier, branch,
                             {int(branch.states.size()) - 1}, *model, 1);
  if (!res.failures.empty()) return false;
  for (const auto& rep : res.reports)
    for (const auto& urep : rep) {
      if (!urep.success) return false;
      for (const auto& h : urep.hops)
        if (h.residual > 1e-8 || std::abs(h.correlation) < 0.95 ||
            h.iterations > 50)
          return false;
    }
  return true;
}

}  // namespace

int main() {
  guard(1, "rectangle spectrum matches the separable eigenvalues", crit1);
  guard(2, "simple and multiple points coincide at 17.574", crit2);
  guard(3, "branch origin 13.736 for the third transverse mode", crit3);
  guard(4, "spherical cap onset values match the published table", crit4);
  guard(5, "composed patterns satisfy the constraint rows with zero growth", crit5);
  guard(6, "analytic Jacobian matches central differences", crit6);
  guard(7, "traced branch states are integrator fixed points", crit7);
  guard(8, "time integration respects the onset threshold", crit8);
  guard(9, "multigrid iteration count and time scaling in range", crit9);
  guard(10, "mixed-mode guards raise distinct errors", crit10);
  guard(11, "full pipeline on a user-style mesh from disk", crit11);
  std::printf("%s (%d/11)\n", failures == 0 ? "ALL CRITERIA PASSED" : "FAILURES",
              11 - failures);
  return failures == 0 ? 0 : 1;
}
