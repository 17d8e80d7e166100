#pragma once

#include <string>
#include <vector>

#include "rdsurf/bifurcate.hpp"
#include "rdsurf/fem.hpp"

namespace rdsurf {

struct ContinuationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct SwitchFailedError : ContinuationError {
  using ContinuationError::ContinuationError;
};
struct StepFailedError : ContinuationError {
  using ContinuationError::ContinuationError;
};

struct NewtonOptions {
  double tol = 1e-9;  // rms residual
  int max_iters = 50;
  int max_backtracks = 8;
};

struct NewtonResult {
  Vec x;
  int iterations = 0;
  double residual_rms = 0;
};

// Newton with residual backtracking at fixed parameter value. Returns the
// input unchanged (0 iterations) when it already satisfies the tolerance.
NewtonResult newton_correct(const FemSpace& space, const RDModel& model,
                            const Vec& x0, double alpha,
                            const NewtonOptions& opts = {});

struct BranchState {
  Vec x;
  double alpha = 0;
  double arclength = 0;
  double step = 0;        // ds used to reach this state
  Vec tangent;            // (t_x, t_alpha), unit in the scaled norm
  double residual_rms = 0;
};

struct Branch {
  std::vector<BranchState> states;
  BifurcationPoint origin;
  std::vector<double> norm_series;  // |x - x_h|_2 / sqrt(2 n_dof)
  std::string failure_note;         // empty on clean termination
};

struct ContinuationOptions {
  NewtonOptions newton;
  double theta = 1.0;             // tangent scale factor
  double ds_min = 1e-6;
  double ds_max = 0.5;
  double ds_grow = 1.3;
  double divergence_floor = 1e-3; // relative to |x_h|, result must exceed it
  int max_retries = 4;            // eps ladder length in branch_switch
  int blend_iters = 5;            // guidance decay horizon
};

// Jump from the homogeneous state onto the nonlinear branch emerging at
// `point`, freeing the parameter and pinning the pattern's pivot dof
// (bordering constraint). Retries with the antithetic jump and an
// eps0-halving/doubling ladder before giving up.
BranchState branch_switch(const FemSpace& space, const RDModel& model,
                          const BifurcationPoint& point,
                          const BifurcationPattern& pattern, double eps0,
                          const ContinuationOptions& opts = {});

// One pseudo-arclength predictor-corrector step. On corrector failure the
// step keeps halving (>= ds_min); on success ds grows by ds_grow (<= ds_max).
// The new tangent keeps the previous orientation.
BranchState arclength_step(const FemSpace& space, const RDModel& model,
                           const BranchState& state,
                           const ContinuationOptions& opts = {});

Branch trace_branch(const FemSpace& space, const RDModel& model,
                    const BifurcationPoint& point,
                    const BifurcationPattern& pattern, double eps0,
                    double alpha_lo, double alpha_hi, int max_steps,
                    const ContinuationOptions& opts = {});

// CSV: step,alpha,arclength,norm,residual_rms
void save_branch_csv(const Branch& branch, const std::string& path);

}  // namespace rdsurf
