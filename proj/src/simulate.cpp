#include "rdsurf/simulate.hpp"

#include <Eigen/SparseCholesky>
#include <cmath>

namespace rdsurf {

namespace {

SpMat lump(const SpMat& M) {
  Vec d = M * Vec::Ones(M.cols());
  SpMat Ml(M.rows(), M.cols());
  Ml.reserve(Eigen::VectorXi::Constant(M.cols(), 1));
  for (int i = 0; i < M.rows(); ++i) Ml.insert(i, i) = d[i];
  Ml.makeCompressed();
  return Ml;
}

// diffusion implicit, reaction + lagged chemotaxis explicit; the linear
// solves reuse one factorization per component for the whole integration
struct Stepper {
  const FemSpace& space;
  const RDModel& model;
  double alpha, dt;
  int n;
  SpMat M, L;
  double D1, D2;
  Eigen::SimplicialLDLT<SpMat> solA, solB;

  Stepper(const FemSpace& s, const RDModel& m, double alpha_, double dt_,
          MassTreatment mass)
      : space(s), model(m), alpha(alpha_), dt(dt_), n(s.n_dof) {
    if (!(dt > 0)) throw SimulateError("imex_step: dt must be positive");
    double bound = imex_dt_bound(m, alpha_);
    if (dt > bound)
      throw SimulateError("imex_step: dt " + std::to_string(dt) +
                          " exceeds explicit stability bound " +
                          std::to_string(bound));
    M = assemble_mass(s);
    if (mass == MassTreatment::Lumped) M = lump(M);
    L = assemble_stiffness(s);
    D1 = m.D1(alpha_);
    D2 = m.D2(alpha_);
    SpMat A = M + dt * D1 * L;
    SpMat B = M + dt * D2 * L;
    solA.compute(A);
    solB.compute(B);
    if (solA.info() != Eigen::Success || solB.info() != Eigen::Success)
      throw SimulateError("imex_step: factorization failed");
  }

  Vec step(const Vec& x) const {
    Vec r = assemble_residual(space, model, x, alpha);
    Vec a = x.head(n), b = x.tail(n);
    // r_a = -D1 (L a + boundary coupling) + explicit terms; adding D1 L a
    // back leaves exactly the part the implicit operator does not carry
    Vec rhs_a = M * a + dt * (r.head(n) + D1 * (L * a));
    Vec rhs_b = M * b + dt * (r.tail(n) + D2 * (L * b));
    Vec out(2 * n);
    out.head(n) = solA.solve(rhs_a);
    out.tail(n) = solB.solve(rhs_b);
    if (solA.info() != Eigen::Success || solB.info() != Eigen::Success)
      throw SimulateError("imex_step: linear solve failed");
    return out;
  }
};

}  // namespace

double imex_dt_bound(const RDModel& model, double alpha) {
  auto h = model.primary_state(alpha);
  auto c = model.linearize(h.a0, h.b0, alpha);
  double k = std::max({std::abs(c.uKu), std::abs(c.uKv), std::abs(c.vKu),
                       std::abs(c.vKv), 1e-12});
  return 2.0 / k;
}

Vec imex_step(const FemSpace& space, const RDModel& model, const Vec& x,
              double alpha, double dt, MassTreatment mass) {
  return Stepper(space, model, alpha, dt, mass).step(x);
}

IntegrationResult integrate_to_steady(const FemSpace& space,
                                      const RDModel& model, const Vec& x0,
                                      double alpha,
                                      const IntegratorConfig& config) {
  if (!(config.dt > 0) || !(config.steady_tol > 0))
    throw SimulateError("integrate_to_steady: invalid config");
  Stepper stepper(space, model, alpha, config.dt, config.mass);
  Vec xh = homogeneous_state_vector(space, model, alpha);
  const double diverge_norm = 1e6 * std::max(xh.norm(), 1.0);
  const double rms_scale = std::sqrt(double(x0.size()));

  IntegrationResult res;
  res.x = x0;
  while (res.t < config.t_max) {
    Vec xn = stepper.step(res.x);
    res.rate = (xn - res.x).norm() / rms_scale / config.dt;
    res.x = xn;
    res.t += config.dt;
    ++res.steps;
    if (config.snapshot_every > 0 && config.observer &&
        res.steps % config.snapshot_every == 0)
      config.observer(res.steps, res.t, res.x);
    if (!res.x.allFinite() || res.x.norm() > diverge_norm) {
      res.outcome = SteadyOutcome::Diverged;
      return res;
    }
    if (res.rate <= config.steady_tol) {
      res.outcome = SteadyOutcome::Steady;
      return res;
    }
  }
  res.outcome = SteadyOutcome::Timeout;
  return res;
}

}  // namespace rdsurf
