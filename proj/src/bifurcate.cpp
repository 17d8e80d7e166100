#include "rdsurf/bifurcate.hpp"

#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>

namespace rdsurf {

namespace {

struct Quad {
  double A = 0, B = 0, C = 0;  // A l^2 - B l + C
};

Quad quad_coeffs(const LinearCoefficients& c) {
  Quad q;
  q.A = c.uDu * c.vDv - c.uDv * c.vDu;
  q.B = c.uDu * c.vKv + c.vDv * c.uKu - c.uDv * c.vKu - c.vDu * c.uKv;
  q.C = c.uKu * c.vKv - c.uKv * c.vKu;
  return q;
}

LinearCoefficients coeffs_at(const RDModel& model, double alpha) {
  const auto h = model.primary_state(alpha);
  return model.linearize(h.a0, h.b0, alpha);
}

// Roots of a scalar condition F(x) = 0 that is (at most) quadratic in x for
// models whose linearisation is affine in the parameter; fitted from three
// samples, verified, with a sign-scan bisection fallback for the rest.
std::vector<double> solve_condition(const std::function<double(double)>& F,
                                    double x0, const SolveOptions& opts) {
  const double d = std::max(0.5, 0.5 * std::abs(x0));
  const double f0 = F(x0 - d), f1 = F(x0), f2 = F(x0 + d);
  const double c2 = (f2 - 2 * f1 + f0) / (2 * d * d);
  const double c1 = (f2 - f0) / (2 * d);
  const double c0 = f1;
  const double scale =
      std::max({std::abs(f0), std::abs(f1), std::abs(f2), 1e-300});

  std::vector<double> roots;
  auto accept = [&](double t) {
    const double x = x0 + t;
    if (std::abs(F(x)) <= opts.verify_tol * scale) roots.push_back(x);
  };
  if (std::abs(c2) * d * d > 1e-12 * scale) {
    const double disc = c1 * c1 - 4 * c2 * c0;
    if (disc >= 0) {
      const double sq = std::sqrt(disc);
      // stable quadratic roots
      const double qq = -0.5 * (c1 + (c1 >= 0 ? sq : -sq));
      accept(qq / c2);
      if (qq != 0) accept(c0 / qq);
    }
  } else if (std::abs(c1) * d > 1e-14 * scale) {
    accept(-c0 / c1);
  }
  if (roots.empty()) {
    // scan for sign changes over the user interval
    const int nseg = 256;
    double prev_x = opts.bisect_lo, prev_f = F(prev_x);
    for (int i = 1; i <= nseg; ++i) {
      const double x = opts.bisect_lo +
                       (opts.bisect_hi - opts.bisect_lo) * i / double(nseg);
      const double f = F(x);
      if (std::isfinite(prev_f) && std::isfinite(f) && prev_f * f <= 0 &&
          (prev_f != 0 || f != 0)) {
        double lo = prev_x, hi = x, flo = prev_f;
        for (int it = 0; it < 100 && hi - lo > 1e-14 * std::abs(hi); ++it) {
          const double mid = 0.5 * (lo + hi), fm = F(mid);
          if (flo * fm <= 0) {
            hi = mid;
          } else {
            lo = mid;
            flo = fm;
          }
        }
        roots.push_back(0.5 * (lo + hi));
      }
      prev_x = x;
      prev_f = f;
    }
  }
  std::sort(roots.begin(), roots.end());
  roots.erase(std::unique(roots.begin(), roots.end(),
                          [](double a, double b) {
                            return std::abs(a - b) <=
                                   1e-9 * std::max(std::abs(a), std::abs(b));
                          }),
              roots.end());
  return roots;
}

double pick_stable_root(const std::vector<double>& roots,
                        const std::function<LinearCoefficients(double)>& at,
                        const char* what) {
  if (roots.empty())
    throw NoRealSolutionError(std::string(what) + ": no real solution");
  for (double r : roots) {
    if (r <= 0) continue;
    if (stability_preconditions(at(r)).satisfied) return r;
  }
  throw PreconditionError(std::string(what) +
                          ": no solution satisfies the stability preconditions");
}

}  // namespace

std::vector<double> lambda_roots(const LinearCoefficients& c) {
  const Quad q = quad_coeffs(c);
  const double scale = std::max({std::abs(q.A), std::abs(q.B), std::abs(q.C)});
  std::vector<double> roots;
  if (scale == 0) return roots;
  if (std::abs(q.A) <= 1e-14 * scale) {
    if (std::abs(q.B) > 1e-14 * scale) roots.push_back(q.C / q.B);
    return roots;
  }
  const double disc = q.B * q.B - 4 * q.A * q.C;
  if (disc < 0) return roots;
  const double sq = std::sqrt(disc);
  const double r1 = (q.B - sq) / (2 * q.A);
  const double r2 = (q.B + sq) / (2 * q.A);
  roots = {std::min(r1, r2), std::max(r1, r2)};
  if (disc == 0) roots.pop_back();
  return roots;
}

double solve_continuation_param(const RDModel& model, double Lambda,
                                ModeRule rule, const SolveOptions& opts) {
  if (!(Lambda > 0))
    throw std::invalid_argument("solve_continuation_param: Lambda must be > 0");

  if (rule == ModeRule::GrowthFactor) {
    const auto names = model.parameter_names();
    if (std::find(names.begin(), names.end(), "gamma") == names.end())
      throw NoRealSolutionError(
          "growth-factor rule needs a model with a reaction scale");
    auto at = [&](double g) {
      auto m = model.with_parameter("gamma", g);
      return coeffs_at(*m, m->parameter(m->continuation_parameter()));
    };
    auto F = [&](double g) {
      const Quad q = quad_coeffs(at(g));
      return q.A * Lambda * Lambda - q.B * Lambda + q.C;
    };
    return pick_stable_root(solve_condition(F, std::max(1.0, model.parameter("gamma")), opts),
                            at, "growth factor");
  }

  auto at = [&](double alpha) { return coeffs_at(model, alpha); };
  if (rule == ModeRule::NonExclusive) {
    if (auto closed = model.continuation_closed_form(Lambda)) {
      if (!stability_preconditions(at(*closed)).satisfied)
        throw PreconditionError(
            "closed-form parameter violates the stability preconditions");
      return *closed;
    }
  }
  auto F = [&](double alpha) {
    const Quad q = quad_coeffs(at(alpha));
    if (rule == ModeRule::Exclusive) return 2 * Lambda * q.A - q.B;
    return q.A * Lambda * Lambda - q.B * Lambda + q.C;
  };
  const double x0 = std::max(1.0, model.parameter(model.continuation_parameter()));
  return pick_stable_root(solve_condition(F, x0, opts), at,
                          rule == ModeRule::Exclusive ? "exclusive mode"
                                                      : "bifurcation parameter");
}

CoefficientRatio coefficient_ratio(const LinearCoefficients& c, double Lambda) {
  const Quad q = quad_coeffs(c);
  const double res = q.A * Lambda * Lambda - q.B * Lambda + q.C;
  const double scale = std::max(
      {std::abs(q.A) * Lambda * Lambda, std::abs(q.B) * Lambda, std::abs(q.C), 1e-300});
  if (std::abs(res) > 1e-6 * scale)
    throw std::invalid_argument(
        "coefficient_ratio: Lambda is not a root of the quadratic");
  const double r1u = c.uKu - c.uDu * Lambda, r1v = c.uKv - c.uDv * Lambda;
  const double r2u = c.vKu - c.vDu * Lambda, r2v = c.vKv - c.vDv * Lambda;
  const double s1 = std::max(std::abs(r1u), std::abs(r1v));
  const double s2 = std::max(std::abs(r2u), std::abs(r2v));
  if (s1 <= 1e-300 && s2 <= 1e-300)
    throw std::invalid_argument("coefficient_ratio: both constraint rows vanish");
  const double ru = s1 >= s2 ? r1u : r2u;
  const double rv = s1 >= s2 ? r1v : r2v;
  CoefficientRatio out;
  if (std::abs(rv) <= 1e-14 * std::abs(ru)) {
    out.u = 0;
    out.v = 1;
  } else {
    out.u = 1;
    out.v = -ru / rv;
  }
  return out;
}

namespace {

std::pair<BifurcationPoint, BifurcationPattern> compose_group(
    const EigenBasis& basis, const std::vector<int>& group,
    const std::vector<double>& weights, const RDModel& model, BifKind kind,
    const SolveOptions& opts) {
  if (group.empty() || group.size() != weights.size())
    throw std::invalid_argument("compose: group/weight size mismatch");
  double wmax = 0;
  for (double w : weights) wmax = std::max(wmax, std::abs(w));
  if (wmax == 0) throw std::invalid_argument("compose: weights all zero");

  double lam_min = basis.pairs[size_t(group.front())].lambda;
  double lam_max = lam_min;
  for (int i : group) {
    if (i < 0 || i >= int(basis.pairs.size()))
      throw std::invalid_argument("compose: mode index out of range");
    lam_min = std::min(lam_min, basis.pairs[size_t(i)].lambda);
    lam_max = std::max(lam_max, basis.pairs[size_t(i)].lambda);
  }
  const double Lambda = 0.5 * (lam_min + lam_max);
  if (!(Lambda > 0))
    throw std::invalid_argument("compose: eigenvalue must be positive (zero mode?)");
  if (lam_max - lam_min > 1e-3 * Lambda)
    throw std::invalid_argument("compose: eigenvalue spread exceeds grouping tolerance");

  const double alpha =
      solve_continuation_param(model, Lambda, ModeRule::NonExclusive, opts);
  const auto h = model.primary_state(alpha);
  const auto c = model.linearize(h.a0, h.b0, alpha);
  const auto ratio = coefficient_ratio(c, Lambda);

  BifurcationPoint point;
  point.alpha = alpha;
  point.lambdas = {Lambda};
  point.kind = kind;
  point.mode_indices = group;

  Vec u = Vec::Zero(basis.pairs.front().vector.size());
  for (size_t i = 0; i < group.size(); ++i)
    u += weights[i] * basis.pairs[size_t(group[i])].vector;

  BifurcationPattern pat;
  const double s = ratio.finite() ? ratio.s() : 0.0;
  if (ratio.finite()) {
    pat.u_field = u;
    pat.v_field = s * u;
    pat.s_m = s;
  } else {
    pat.u_field = Vec::Zero(u.size());
    pat.v_field = u;
    pat.s_m = std::numeric_limits<double>::infinity();
  }
  const double norm = std::max(pat.u_field.cwiseAbs().maxCoeff(),
                               pat.v_field.cwiseAbs().maxCoeff());
  if (norm > 0) {
    pat.u_field /= norm;
    pat.v_field /= norm;
  }
  for (size_t i = 0; i < group.size(); ++i)
    pat.coefficients.emplace_back(weights[i] * ratio.u / norm,
                                  weights[i] * ratio.v / norm);
  return {point, pat};
}

}  // namespace

std::pair<BifurcationPoint, BifurcationPattern> compose_simple(
    const EigenBasis& basis, int index, const RDModel& model,
    const SolveOptions& opts) {
  if (index < 0 || index >= int(basis.pairs.size()))
    throw std::invalid_argument("compose_simple: index out of range");
  if (basis.has_zero_mode && index == 0)
    throw std::invalid_argument("compose_simple: the zero mode has no bifurcation");
  BifKind kind = BifKind::Simple;
  for (const auto& g : basis.groups)
    if (std::find(g.begin(), g.end(), index) != g.end() && g.size() > 1)
      kind = BifKind::Multiple;
  return compose_group(basis, {index}, {1.0}, model, kind, opts);
}

std::pair<BifurcationPoint, BifurcationPattern> compose_multiple(
    const EigenBasis& basis, const std::vector<int>& group,
    const std::vector<double>& weights, const RDModel& model,
    const SolveOptions& opts) {
  if (group.size() < 2)
    throw std::invalid_argument("compose_multiple: group size must be >= 2");
  return compose_group(basis, group, weights, model, BifKind::Multiple, opts);
}

std::pair<BifurcationPoint, BifurcationPattern> compose_mixed(
    const EigenBasis& basis, const std::vector<int>& group_m,
    const std::vector<int>& group_n, const std::vector<double>& weights_m,
    const std::vector<double>& weights_n, const RDModel& model,
    const SolveOptions& opts) {
  if (group_m.empty() || group_n.empty() ||
      group_m.size() != weights_m.size() || group_n.size() != weights_n.size())
    throw std::invalid_argument("compose_mixed: group/weight size mismatch");
  auto lam_of = [&](const std::vector<int>& g) {
    double s = 0;
    for (int i : g) {
      if (i < 0 || i >= int(basis.pairs.size()))
        throw std::invalid_argument("compose_mixed: mode index out of range");
      s += basis.pairs[size_t(i)].lambda;
    }
    return s / double(g.size());
  };
  const double lm = lam_of(group_m), ln = lam_of(group_n);
  if (!(lm > 0) || !(ln > lm))
    throw std::invalid_argument("compose_mixed: need 0 < Lambda_m < Lambda_n");

  auto at = [&](double alpha) { return coeffs_at(model, alpha); };
  auto F = [&](double alpha) {
    const Quad q = quad_coeffs(at(alpha));
    return q.A * q.A * (ln - lm) * (ln - lm) + 4 * q.A * q.C - q.B * q.B;
  };
  const double x0 = std::max(1.0, model.parameter(model.continuation_parameter()));
  auto roots = solve_condition(F, x0, opts);
  if (roots.empty())
    throw NoRealSolutionError("compose_mixed: condition has no real parameter");

  double alpha = 0;
  bool found = false;
  std::string last_fail = "compose_mixed: no valid solution";
  for (double r : roots) {
    if (r <= 0) continue;
    const auto c = at(r);
    const Quad q = quad_coeffs(c);
    if (!(q.A > 0)) {
      last_fail = "compose_mixed: diffusion constraint uDu vDv > uDv vDu fails";
      continue;
    }
    if (!stability_preconditions(c).satisfied) {
      last_fail = "compose_mixed: stability preconditions violated";
      continue;
    }
    // the quadratic's roots at the solved parameter must recover the two
    // discrete eigenvalues up to discretisation slack
    auto rts = lambda_roots(c);
    if (rts.size() == 2 && std::abs(rts[0] - lm) <= 1e-2 * lm &&
        std::abs(rts[1] - ln) <= 1e-2 * ln) {
      alpha = r;
      found = true;
      break;
    }
    last_fail = "compose_mixed: solved parameter does not reproduce both eigenvalues";
  }
  if (!found) {
    if (last_fail.find("diffusion") != std::string::npos)
      throw DiffusionConstraintError(last_fail);
    if (last_fail.find("preconditions") != std::string::npos)
      throw PreconditionError(last_fail);
    throw NoRealSolutionError(last_fail);
  }

  const auto c = at(alpha);
  // report the exact roots at alpha so the point satisfies the quadratic
  // identically; they sit within discretisation slack of lm, ln
  const auto exact = lambda_roots(c);
  const double lm_x = exact[0], ln_x = exact[1];
  const double sm = (c.uDu * lm_x - c.uKu) / (c.uKv - c.uDv * lm_x);
  const double sn = (c.vDu * ln_x - c.vKu) / (c.vKv - c.vDv * ln_x);

  BifurcationPoint point;
  point.alpha = alpha;
  point.lambdas = {lm_x, ln_x};
  point.kind = BifKind::Mixed;
  point.mode_indices = group_m;
  point.mode_indices.insert(point.mode_indices.end(), group_n.begin(), group_n.end());

  Vec um = Vec::Zero(basis.pairs.front().vector.size());
  Vec un = um;
  for (size_t i = 0; i < group_m.size(); ++i)
    um += weights_m[i] * basis.pairs[size_t(group_m[i])].vector;
  for (size_t i = 0; i < group_n.size(); ++i)
    un += weights_n[i] * basis.pairs[size_t(group_n[i])].vector;

  BifurcationPattern pat;
  pat.u_field = um + un;
  pat.v_field = sm * um + sn * un;
  pat.s_m = sm;
  pat.s_n = sn;
  const double norm = std::max(pat.u_field.cwiseAbs().maxCoeff(),
                               pat.v_field.cwiseAbs().maxCoeff());
  if (norm > 0) {
    pat.u_field /= norm;
    pat.v_field /= norm;
  }
  for (size_t i = 0; i < group_m.size(); ++i)
    pat.coefficients.emplace_back(weights_m[i] / norm, sm * weights_m[i] / norm);
  for (size_t i = 0; i < group_n.size(); ++i)
    pat.coefficients.emplace_back(weights_n[i] / norm, sn * weights_n[i] / norm);
  return {point, pat};
}

namespace {

// tau at one parameter value; v receives the bordered solve result
double test_function(const FemSpace& space, const RDModel& model, double alpha,
                     int& pivot, Vec& v) {
  Vec x = homogeneous_state_vector(space, model, alpha);
  SpMat J = assemble_jacobian(space, model, x, alpha);
  if (pivot < 0) {
    double best = -1;
    const Vec diag = J.diagonal();
    for (Eigen::Index i = 0; i < diag.size(); ++i)
      if (std::abs(diag[i]) > best) {
        best = std::abs(diag[i]);
        pivot = int(i);
      }
  }
  // replace row `pivot` by the unit row
  SpMat Jk = J;
  for (int c = 0; c < Jk.outerSize(); ++c)
    for (SpMat::InnerIterator it(Jk, c); it; ++it)
      if (it.row() == pivot) it.valueRef() = (it.col() == pivot) ? 1.0 : 0.0;
  Jk.prune(0.0, 0.0);
  // the unit diagonal entry might be absent from the pattern
  if (Jk.coeff(pivot, pivot) == 0.0) Jk.coeffRef(pivot, pivot) = 1.0;
  Eigen::SparseLU<SpMat> lu(Jk);
  if (lu.info() != Eigen::Success)
    throw std::runtime_error("reference_detect: bordered solve failed");
  Vec ek = Vec::Zero(J.rows());
  ek[pivot] = 1.0;
  v = lu.solve(ek);
  return (J * v)[pivot];
}

}  // namespace

std::vector<DetectedBifurcation> reference_detect(const FemSpace& space,
                                                  const RDModel& model,
                                                  double alpha_lo,
                                                  double alpha_hi, double step,
                                                  int pivot) {
  if (!(alpha_hi > alpha_lo) || !(step > 0))
    throw std::invalid_argument("reference_detect: bad range");
  std::vector<DetectedBifurcation> out;
  Vec v;
  int k = pivot;
  double a_prev = alpha_lo;
  double tau_prev;
  try {
    tau_prev = test_function(space, model, a_prev, k, v);
  } catch (const std::runtime_error& e) {
    std::fprintf(stderr, "warning: %s at alpha=%g\n", e.what(), a_prev);
    tau_prev = std::numeric_limits<double>::quiet_NaN();
  }
  for (double a = alpha_lo + step; a <= alpha_hi + 1e-12 * std::abs(alpha_hi);
       a += step) {
    double tau;
    try {
      tau = test_function(space, model, a, k, v);
    } catch (const std::runtime_error& e) {
      std::fprintf(stderr, "warning: %s at alpha=%g\n", e.what(), a);
      a_prev = a;
      tau_prev = std::numeric_limits<double>::quiet_NaN();
      continue;
    }
    if (std::isfinite(tau_prev) && tau_prev < 0 && tau >= 0) {
      double lo = a_prev, hi = a;
      Vec v_mid = v;
      for (int it = 0; it < 60 && hi - lo > 1e-6 * std::abs(hi); ++it) {
        const double mid = 0.5 * (lo + hi);
        double tm;
        try {
          tm = test_function(space, model, mid, k, v_mid);
        } catch (const std::runtime_error&) {
          break;
        }
        if (tm < 0)
          lo = mid;
        else
          hi = mid;
      }
      DetectedBifurcation det;
      det.alpha = 0.5 * (lo + hi);
      int kk = k;
      try {
        test_function(space, model, det.alpha, kk, det.pattern);
      } catch (const std::runtime_error&) {
        det.pattern = v_mid;
      }
      const double norm = det.pattern.cwiseAbs().maxCoeff();
      if (norm > 0) det.pattern /= norm;
      out.push_back(std::move(det));
    }
    a_prev = a;
    tau_prev = tau;
  }
  return out;
}

void save_inventory_csv(const std::vector<BifurcationPoint>& points,
                        const std::string& path) {
  std::FILE* fp = std::fopen(path.c_str(), "w");
  if (!fp) throw std::runtime_error("cannot open " + path);
  std::fprintf(fp, "kind,alpha,lambda_m,lambda_n,mode_indices\n");
  for (const auto& p : points) {
    const char* kind = p.kind == BifKind::Simple
                           ? "simple"
                           : (p.kind == BifKind::Multiple ? "multiple" : "mixed");
    std::string idx;
    for (size_t i = 0; i < p.mode_indices.size(); ++i) {
      if (i) idx += ';';
      idx += std::to_string(p.mode_indices[i]);
    }
    std::fprintf(fp, "%s,%.17g,%.17g,%.17g,%s\n", kind, p.alpha, p.lambdas[0],
                 p.lambdas.size() > 1 ? p.lambdas[1] : 0.0, idx.c_str());
  }
  std::fclose(fp);
}

}  // namespace rdsurf
