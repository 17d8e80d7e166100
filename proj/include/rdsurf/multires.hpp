#pragma once

#include <memory>
#include <string>
#include <vector>

#include "rdsurf/continuation.hpp"

namespace rdsurf {

struct MultiresError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// L_0 coarsest ... L_N = finest. Hop l-1 -> l goes through the in-place
// subdivision R_{l-1} of L_{l-1}; the projection map R_{l-1} -> L_l is
// precomputed (identity, and skipped, when L_l is that same subdivision).
struct MeshHierarchy {
  std::vector<std::unique_ptr<SurfaceMesh>> meshes;    // L_0 .. L_N
  std::vector<FemSpace> spaces;
  std::vector<std::unique_ptr<SurfaceMesh>> refined;   // R_{l-1}, per hop
  std::vector<FemSpace> refined_spaces;
  std::vector<std::vector<std::array<int, 2>>> midpoints;  // per hop
  std::vector<InterpolationMap> project;               // R_{l-1} -> L_l
  std::vector<char> project_is_identity;               // per hop
  BC bc = BC::NeumannZero;

  int n_hops() const { return int(meshes.size()) - 1; }
  const SurfaceMesh& level(int l) const { return *meshes[size_t(l)]; }
};

// Coarsen `fine` by repeated quadric edge collapse, one level per factor of
// coarsening_ratio. Each level must keep at least min_triangles.
MeshHierarchy build_hierarchy(const SurfaceMesh& fine, int n_levels,
                              BC bc, double coarsening_ratio = 4.0,
                              int min_triangles = 200);

// Refine `coarse` by repeated 1->4 subdivision; the projection hop is the
// identity by construction and is skipped during upsampling.
MeshHierarchy build_hierarchy_by_subdivision(const SurfaceMesh& coarse,
                                             int n_levels, BC bc);

struct HopReport {
  int level = 0;        // target level of the hop
  int hop = 0;          // 0 = subdivide-resolve, 1 = project-resolve
  int iterations = 0;
  double seconds = 0;
  double residual = 0;
  double correlation = 0;  // converged state vs interpolated guess
  bool used_trust_region = false;
};

struct UpsampleReport {
  std::vector<HopReport> hops;
  bool success = true;
  std::string note;  // identifies the failing hop
};

// linear prolongation of a dof field from level l-1 onto R_{l-1}
Vec prolong_state(const MeshHierarchy& h, int level, const RDModel& model,
                  const Vec& x, double alpha);

// Two-hop upsample of a converged level l-1 state to level l at fixed alpha:
// subdivide-interpolate-resolve, then project-interpolate-resolve. Newton
// falls back to a dogleg trust-region corrector on hard hops.
std::pair<Vec, UpsampleReport> upsample_solution(
    const MeshHierarchy& h, int level, const Vec& x, double alpha,
    const RDModel& model, const NewtonOptions& opts = {});

struct BranchUpsampleResult {
  std::vector<int> subset;                       // selected state indices
  std::vector<double> alphas;                    // per selected state
  std::vector<std::vector<Vec>> states;          // [hop level 1..N][state]
  std::vector<std::vector<UpsampleReport>> reports;
  std::vector<std::string> failures;             // isolated per state
};

// Upsamples the selected branch states through every level; states are
// independent jobs run with up to parallel_width workers.
BranchUpsampleResult upsample_branch(const MeshHierarchy& h,
                                     const Branch& branch,
                                     const std::vector<int>& subset,
                                     const RDModel& model, int parallel_width,
                                     const NewtonOptions& opts = {});

// CSV: state,level,hop,iters,seconds,residual,correlation
void save_reports_csv(const BranchUpsampleResult& result,
                      const std::string& path);

// per level: mesh path, dof count, projection-map path; meshes saved as OFF
void save_hierarchy(const MeshHierarchy& h, const std::string& dir,
                    const std::string& prefix);

}  // namespace rdsurf
