#pragma once

#include <optional>
#include <string>
#include <vector>

#include "rdsurf/fem.hpp"
#include "rdsurf/spectral.hpp"

namespace rdsurf {

struct BifurcationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
// the scalar condition has no real solution in reach
struct NoRealSolutionError : BifurcationError {
  using BifurcationError::BifurcationError;
};
// solution found but the reaction part is not stable without diffusion
struct PreconditionError : BifurcationError {
  using BifurcationError::BifurcationError;
};
// mixed-mode diffusion requirement uDu vDv > uDv vDu fails
struct DiffusionConstraintError : BifurcationError {
  using BifurcationError::BifurcationError;
};

enum class ModeRule { NonExclusive, Exclusive, GrowthFactor };
enum class BifKind { Simple, Multiple, Mixed };

struct BifurcationPoint {
  double alpha = 0;
  std::vector<double> lambdas;  // one entry, or two (mixed, ascending)
  BifKind kind = BifKind::Simple;
  std::vector<int> mode_indices;
};

struct BifurcationPattern {
  Vec u_field, v_field;  // per dof, max|u_field| scaled to 1
  std::vector<std::pair<double, double>> coefficients;  // (u_i, v_i) per mode
  double s_m = 0;
  std::optional<double> s_n;
};

struct SolveOptions {
  double bisect_lo = 1e-6;
  double bisect_hi = 100.0;
  double verify_tol = 1e-6;
};

// Real roots, ascending, of
//   (uDu vDv - uDv vDu) l^2
//   - (uDu vKv + vDv uKu - uDv vKu - vDu uKv) l
//   + (uKu vKv - uKv vKu) = 0,
// the marginal condition for the linearised system at wavenumber l.
// Degenerate leading coefficient falls back to the linear equation.
std::vector<double> lambda_roots(const LinearCoefficients& c);

// Value of the continuation parameter (or the reaction scale, for
// GrowthFactor) at which Lambda becomes a bifurcation eigenvalue.
// NonExclusive: Lambda is a root of the quadratic; Exclusive: Lambda is the
// repeated root; GrowthFactor: solve for the model's reaction scale instead.
double solve_continuation_param(const RDModel& model, double Lambda,
                                ModeRule rule, const SolveOptions& opts = {});

// Spectral coefficient pair (u, v) with (uKu - uDu L) u + (uKv - uDv L) v = 0,
// normalised u = 1 when possible, (0, 1) when the v-row coefficient vanishes.
struct CoefficientRatio {
  double u = 1, v = 0;
  bool finite() const { return u != 0; }
  double s() const { return v / u; }
};
CoefficientRatio coefficient_ratio(const LinearCoefficients& c, double Lambda);

std::pair<BifurcationPoint, BifurcationPattern> compose_simple(
    const EigenBasis& basis, int index, const RDModel& model,
    const SolveOptions& opts = {});

std::pair<BifurcationPoint, BifurcationPattern> compose_multiple(
    const EigenBasis& basis, const std::vector<int>& group,
    const std::vector<double>& weights, const RDModel& model,
    const SolveOptions& opts = {});

std::pair<BifurcationPoint, BifurcationPattern> compose_mixed(
    const EigenBasis& basis, const std::vector<int>& group_m,
    const std::vector<int>& group_n, const std::vector<double>& weights_m,
    const std::vector<double>& weights_n, const RDModel& model,
    const SolveOptions& opts = {});

// Scan the trivial branch with the test function tau = e_k' J v, J_k v = e_k,
// J_k = (I - e_k e_k') J + e_k e_k'; a minus-to-plus sign change brackets a
// bifurcation, refined by midpoint search. pivot < 0 picks the dof with the
// largest Jacobian diagonal.
struct DetectedBifurcation {
  double alpha = 0;
  Vec pattern;  // stacked (u; v), max-normalised
};
std::vector<DetectedBifurcation> reference_detect(const FemSpace& space,
                                                  const RDModel& model,
                                                  double alpha_lo,
                                                  double alpha_hi, double step,
                                                  int pivot = -1);

// CSV: kind,alpha,lambda_m,lambda_n,mode_indices (indices joined by ';')
void save_inventory_csv(const std::vector<BifurcationPoint>& points,
                        const std::string& path);

}  // namespace rdsurf
