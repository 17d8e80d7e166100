#pragma once

#include <functional>

#include "rdsurf/fem.hpp"

namespace rdsurf {

struct SimulateError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class MassTreatment { Consistent, Lumped };

struct IntegratorConfig {
  double dt = 1e-3;
  double t_max = 100.0;
  double steady_tol = 1e-6;  // rms rate |x' - x| / dt threshold
  MassTreatment mass = MassTreatment::Consistent;
  int snapshot_every = 0;  // 0 disables the observer
  std::function<void(int step, double t, const Vec& x)> observer;
};

enum class SteadyOutcome { Steady, Diverged, Timeout };

struct IntegrationResult {
  Vec x;
  SteadyOutcome outcome = SteadyOutcome::Timeout;
  double t = 0;
  int steps = 0;
  double rate = 0;  // last rms rate
};

// explicit-part stability bound estimated from the reaction derivatives at
// the primary homogeneous state
double imex_dt_bound(const RDModel& model, double alpha);

// One semi-implicit step: diffusion implicit, reactions and the lagged
// chemotaxis transport explicit,
//   (M + dt D L) x' = M x + dt (reaction + chemotaxis)   per component.
// The homogeneous state is a fixed point at every dt.
Vec imex_step(const FemSpace& space, const RDModel& model, const Vec& x,
              double alpha, double dt,
              MassTreatment mass = MassTreatment::Consistent);

IntegrationResult integrate_to_steady(const FemSpace& space,
                                      const RDModel& model, const Vec& x0,
                                      double alpha,
                                      const IntegratorConfig& config = {});

}  // namespace rdsurf
