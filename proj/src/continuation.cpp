#include "rdsurf/continuation.hpp"

#include <Eigen/SparseLU>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace rdsurf {

namespace {

double rms(const Vec& r) { return r.norm() / std::sqrt(double(r.size())); }

// scaled inner product for (x, alpha) tangent vectors
double scaled_dot(const Vec& ax, double aa, const Vec& bx, double ba,
                  double theta) {
  return ax.dot(bx) + theta * aa * ba;
}

// bordered matrix [[J, r_alpha], [row_x, row_a]]
SpMat bordered(const SpMat& J, const Vec& ralpha, const Vec& row_x,
               double row_a) {
  const int n = int(J.rows());
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(size_t(J.nonZeros()) + 2 * size_t(n) + 1);
  for (int c = 0; c < J.outerSize(); ++c)
    for (SpMat::InnerIterator it(J, c); it; ++it)
      trip.emplace_back(int(it.row()), c, it.value());
  for (int i = 0; i < n; ++i) {
    if (ralpha[i] != 0.0) trip.emplace_back(i, n, ralpha[i]);
    if (row_x[i] != 0.0) trip.emplace_back(n, i, row_x[i]);
  }
  trip.emplace_back(n, n, row_a);
  SpMat B(n + 1, n + 1);
  B.setFromTriplets(trip.begin(), trip.end());
  return B;
}

// Newton on the bordered system r(x, alpha) = 0, g(x, alpha) = 0 where
// g is affine: row_x . x + row_a * alpha - rhs. Optional guidance pulls the
// iterate toward `guide` with a weight decaying linearly over iterations.
struct BorderedResult {
  Vec x;
  double alpha = 0;
  double residual_rms = 0;
  int iterations = 0;
  bool ok = false;
};

BorderedResult bordered_newton(const FemSpace& space, const RDModel& model,
                               Vec x, double alpha, const Vec& row_x,
                               double row_a, double rhs, const Vec* guide,
                               const ContinuationOptions& opts) {
  const int n = int(x.size());
  BorderedResult res;
  Vec r = assemble_residual(space, model, x, alpha);
  double g = row_x.dot(x) + row_a * alpha - rhs;
  auto total = [&](const Vec& rr, double gg) {
    return std::sqrt((rr.squaredNorm() + gg * gg) / double(n + 1));
  };
  for (int iter = 0; iter < opts.newton.max_iters; ++iter) {
    if (rms(r) <= opts.newton.tol && std::abs(g) <= opts.newton.tol) {
      res.x = x;
      res.alpha = alpha;
      res.residual_rms = rms(r);
      res.iterations = iter;
      res.ok = true;
      return res;
    }
    SpMat J = assemble_jacobian(space, model, x, alpha);
    Vec ralpha = residual_alpha_derivative(space, model, x, alpha);
    SpMat B = bordered(J, ralpha, row_x, row_a);
    Eigen::SparseLU<SpMat> lu(B);
    if (lu.info() != Eigen::Success) return res;
    Vec F(n + 1);
    F.head(n) = r;
    F[n] = g;
    Vec dx = lu.solve(-F);
    if (lu.info() != Eigen::Success) return res;

    double f0 = total(r, g);
    double s = 1.0;
    Vec xn;
    double an = alpha, gn = g;
    Vec rn;
    for (int bt = 0; bt <= opts.newton.max_backtracks; ++bt) {
      xn = x + s * dx.head(n);
      an = alpha + s * dx[n];
      if (guide) {
        double w = std::max(0.0, 1.0 - double(iter + 1) / opts.blend_iters);
        xn = (1.0 - w) * xn + w * (*guide);
      }
      rn = assemble_residual(space, model, xn, an);
      gn = row_x.dot(xn) + row_a * an - rhs;
      if (total(rn, gn) < f0 || bt == opts.newton.max_backtracks) break;
      s *= 0.5;
    }
    x = xn;
    alpha = an;
    r = rn;
    g = gn;
  }
  if (rms(r) <= opts.newton.tol && std::abs(g) <= opts.newton.tol) {
    res.x = x;
    res.alpha = alpha;
    res.residual_rms = rms(r);
    res.iterations = opts.newton.max_iters;
    res.ok = true;
  }
  return res;
}

// tangent at (x, alpha) continuing the orientation of (tx_old, ta_old)
bool compute_tangent(const FemSpace& space, const RDModel& model, const Vec& x,
                     double alpha, const Vec& tx_old, double ta_old,
                     double theta, Vec& tx, double& ta) {
  const int n = int(x.size());
  SpMat J = assemble_jacobian(space, model, x, alpha);
  Vec ralpha = residual_alpha_derivative(space, model, x, alpha);
  SpMat B = bordered(J, ralpha, tx_old, theta * ta_old);
  Eigen::SparseLU<SpMat> lu(B);
  if (lu.info() != Eigen::Success) return false;
  Vec e = Vec::Zero(n + 1);
  e[n] = 1.0;
  Vec t = lu.solve(e);
  if (lu.info() != Eigen::Success) return false;
  tx = t.head(n);
  ta = t[n];
  double nrm = std::sqrt(scaled_dot(tx, ta, tx, ta, theta));
  if (!(nrm > 0) || !std::isfinite(nrm)) return false;
  tx /= nrm;
  ta /= nrm;
  if (scaled_dot(tx, ta, tx_old, ta_old, theta) < 0) {
    tx = -tx;
    ta = -ta;
  }
  return true;
}

double state_norm(const FemSpace& space, const RDModel& model, const Vec& x,
                  double alpha) {
  Vec xh = homogeneous_state_vector(space, model, alpha);
  return (x - xh).norm() / std::sqrt(double(x.size()));
}

}  // namespace

NewtonResult newton_correct(const FemSpace& space, const RDModel& model,
                            const Vec& x0, double alpha,
                            const NewtonOptions& opts) {
  NewtonResult res;
  Vec x = x0;
  Vec r = assemble_residual(space, model, x, alpha);
  for (int iter = 0; iter < opts.max_iters; ++iter) {
    double rn = rms(r);
    if (rn <= opts.tol) {
      res.x = x;
      res.iterations = iter;
      res.residual_rms = rn;
      return res;
    }
    SpMat J = assemble_jacobian(space, model, x, alpha);
    Eigen::SparseLU<SpMat> lu(J);
    if (lu.info() != Eigen::Success)
      throw ContinuationError("newton_correct: singular jacobian");
    Vec dx = lu.solve(-r);
    if (lu.info() != Eigen::Success)
      throw ContinuationError("newton_correct: linear solve failed");
    double f0 = r.norm();
    double s = 1.0;
    Vec xn, rtrial;
    for (int bt = 0; bt <= opts.max_backtracks; ++bt) {
      xn = x + s * dx;
      rtrial = assemble_residual(space, model, xn, alpha);
      if (rtrial.norm() < f0 || bt == opts.max_backtracks) break;
      s *= 0.5;
    }
    x = xn;
    r = rtrial;
  }
  if (rms(r) <= opts.tol) {
    res.x = x;
    res.iterations = opts.max_iters;
    res.residual_rms = rms(r);
    return res;
  }
  throw ContinuationError("newton_correct: no convergence, residual rms " +
                          std::to_string(rms(r)));
}

BranchState branch_switch(const FemSpace& space, const RDModel& model,
                          const BifurcationPoint& point,
                          const BifurcationPattern& pattern, double eps0,
                          const ContinuationOptions& opts) {
  if (!(eps0 >= 1e-3 && eps0 <= 0.07))
    throw SwitchFailedError("branch_switch: eps0 outside [1e-3, 0.07]");
  const int n = space.n_dof;
  Vec d(2 * n);
  d.head(n) = pattern.u_field;
  d.tail(n) = pattern.v_field;
  int pivot = 0;
  pattern.u_field.cwiseAbs().maxCoeff(&pivot);

  Vec xh = homogeneous_state_vector(space, model, point.alpha);
  Vec row = Vec::Zero(2 * n);
  row[pivot] = 1.0;

  // retry ladder: each eps tried with the jump and its antithetic mirror
  std::vector<double> ladder = {eps0};
  for (int k = 1; k <= opts.max_retries; ++k)
    ladder.push_back(k % 2 ? eps0 * std::pow(0.5, (k + 1) / 2)
                           : eps0 * std::pow(2.0, k / 2));
  for (double eps : ladder) {
    for (double sign : {1.0, -1.0}) {
      Vec guide = xh + sign * eps * d;
      double rhs = guide[pivot];
      BorderedResult br = bordered_newton(space, model, guide, point.alpha,
                                          row, 0.0, rhs, &guide, opts);
      if (!br.ok) continue;
      double dist = (br.x - xh).norm();
      if (dist <= opts.divergence_floor * xh.norm()) continue;
      if (std::abs(br.x[pivot] - rhs) > 1e-10 * std::max(1.0, std::abs(rhs)))
        continue;
      BranchState st;
      st.x = br.x;
      st.alpha = br.alpha;
      st.arclength = 0;
      st.step = eps;
      st.residual_rms = br.residual_rms;
      Vec sec = br.x - xh;
      double seca = br.alpha - point.alpha;
      double nrm = std::sqrt(scaled_dot(sec, seca, sec, seca, opts.theta));
      sec /= nrm;
      seca /= nrm;
      Vec tx;
      double ta;
      if (!compute_tangent(space, model, br.x, br.alpha, sec, seca, opts.theta,
                           tx, ta)) {
        tx = sec;
        ta = seca;
      }
      st.tangent.resize(2 * n + 1);
      st.tangent.head(2 * n) = tx;
      st.tangent[2 * n] = ta;
      return st;
    }
  }
  throw SwitchFailedError("branch_switch: all jump attempts failed");
}

BranchState arclength_step(const FemSpace& space, const RDModel& model,
                           const BranchState& state,
                           const ContinuationOptions& opts) {
  const int n2 = int(state.x.size());
  Vec tx = state.tangent.head(n2);
  double ta = state.tangent[n2];
  double ds = state.step;
  while (ds >= opts.ds_min) {
    Vec xp = state.x + ds * tx;
    double ap = state.alpha + ds * ta;
    double rhs = tx.dot(xp) + opts.theta * ta * ap;
    BorderedResult br = bordered_newton(space, model, xp, ap, tx,
                                        opts.theta * ta, rhs, nullptr, opts);
    if (br.ok) {
      BranchState st;
      st.x = br.x;
      st.alpha = br.alpha;
      st.arclength = state.arclength + ds;
      st.step = std::min(ds * opts.ds_grow, opts.ds_max);
      st.residual_rms = br.residual_rms;
      Vec txn;
      double tan;
      if (!compute_tangent(space, model, br.x, br.alpha, tx, ta, opts.theta,
                           txn, tan)) {
        txn = tx;
        tan = ta;
      }
      st.tangent.resize(n2 + 1);
      st.tangent.head(n2) = txn;
      st.tangent[n2] = tan;
      return st;
    }
    ds *= 0.5;
  }
  throw StepFailedError("arclength_step: corrector failed at minimum step");
}

Branch trace_branch(const FemSpace& space, const RDModel& model,
                    const BifurcationPoint& point,
                    const BifurcationPattern& pattern, double eps0,
                    double alpha_lo, double alpha_hi, int max_steps,
                    const ContinuationOptions& opts) {
  Branch branch;
  branch.origin = point;
  if (point.alpha < alpha_lo || point.alpha > alpha_hi) {
    branch.failure_note = "origin outside parameter window";
    return branch;
  }
  BranchState st;
  try {
    st = branch_switch(space, model, point, pattern, eps0, opts);
  } catch (const SwitchFailedError& e) {
    branch.failure_note = e.what();
    return branch;
  }
  branch.states.push_back(st);
  branch.norm_series.push_back(state_norm(space, model, st.x, st.alpha));
  for (int step = 1; step < max_steps; ++step) {
    BranchState next;
    try {
      next = arclength_step(space, model, branch.states.back(), opts);
    } catch (const StepFailedError& e) {
      branch.failure_note = e.what();
      return branch;
    }
    if (next.alpha < alpha_lo || next.alpha > alpha_hi) {
      return branch;  // window exit, clean stop
    }
    branch.states.push_back(next);
    branch.norm_series.push_back(state_norm(space, model, next.x, next.alpha));
  }
  return branch;
}

void save_branch_csv(const Branch& branch, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ContinuationError("cannot open " + path);
  out << "step,alpha,arclength,norm,residual_rms\n";
  char buf[256];
  for (size_t i = 0; i < branch.states.size(); ++i) {
    const BranchState& s = branch.states[i];
    std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g,%.17g,%.17g\n", i,
                  s.alpha, s.arclength, branch.norm_series[i], s.residual_rms);
    out << buf;
  }
}

}  // namespace rdsurf
