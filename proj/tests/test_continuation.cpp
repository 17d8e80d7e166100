#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <fstream>

#include "rdsurf/continuation.hpp"

using namespace rdsurf;

namespace {

const double kPi = 3.14159265358979323846;

struct Setup {
  SurfaceMesh mesh;
  FemSpace space;
  ModelPtr model;
  EigenBasis basis;
  BifurcationPoint point;
  BifurcationPattern pattern;
};

// rectangle 1x4 with the Murray model; mode (0,3) bifurcation near 13.736
const Setup& murray_setup() {
  static Setup s = [] {
    Setup st;
    st.mesh = generate_rectangle(1, 4, 16, 64);
    st.space = make_fem_space(st.mesh, BC::NeumannZero);
    st.model = make_murray();
    EigenOptions eo;
    eo.k = 8;
    st.basis = solve_eigenbasis(assemble_stiffness(st.space),
                                assemble_mass(st.space), eo);
    const double target = 9 * kPi * kPi / 16;
    int idx = -1;
    for (int i = 0; i < int(st.basis.pairs.size()); ++i)
      if (std::abs(st.basis.pairs[i].lambda - target) < 0.3) idx = i;
    REQUIRE(idx >= 0);
    std::tie(st.point, st.pattern) = compose_simple(st.basis, idx, *st.model);
    return st;
  }();
  return s;
}

double correlation(const Vec& a, const Vec& b) {
  const Vec ac = a.array() - a.mean();
  const Vec bc = b.array() - b.mean();
  return ac.dot(bc) / (ac.norm() * bc.norm());
}

}  // namespace

TEST_CASE("newton_correct keeps homogeneous state, zero iterations") {
  const auto& s = murray_setup();
  Vec xh = homogeneous_state_vector(s.space, *s.model, 10.0);
  auto res = newton_correct(s.space, *s.model, xh, 10.0);
  CHECK(res.iterations == 0);
  CHECK((res.x - xh).norm() == 0.0);
}

TEST_CASE("newton_correct below onset returns to homogeneous") {
  const auto& s = murray_setup();
  const double alpha = 10.0;  // below the 12.02 onset
  Vec xh = homogeneous_state_vector(s.space, *s.model, alpha);
  Vec x0 = xh;
  const int n = s.space.n_dof;
  for (int i = 0; i < n; ++i) {
    x0[i] += 0.01 * std::sin(7.0 * i);
    x0[n + i] += 0.01 * std::cos(3.0 * i);
  }
  auto res = newton_correct(s.space, *s.model, x0, alpha);
  CHECK((res.x - xh).lpNorm<Eigen::Infinity>() <= 1e-6);
  CHECK(res.residual_rms <= 1e-9);
}

TEST_CASE("branch_switch rejects eps0 outside bounds") {
  const auto& s = murray_setup();
  CHECK_THROWS_AS(branch_switch(s.space, *s.model, s.point, s.pattern, 0.0),
                  SwitchFailedError);
  CHECK_THROWS_AS(branch_switch(s.space, *s.model, s.point, s.pattern, 0.5),
                  SwitchFailedError);
}

TEST_CASE("branch_switch lands on the mode (0,3) branch") {
  const auto& s = murray_setup();
  const double eps0 = 0.01;
  auto st = branch_switch(s.space, *s.model, s.point, s.pattern, eps0);
  const int n = s.space.n_dof;
  Vec xh = homogeneous_state_vector(s.space, *s.model, s.point.alpha);
  Vec du = st.x.head(n) - xh.head(n);
  CHECK(std::abs(correlation(du, s.pattern.u_field)) >= 0.9);
  CHECK(st.residual_rms <= 1e-9);
  // pivot displacement is pinned exactly
  int pivot = 0;
  s.pattern.u_field.cwiseAbs().maxCoeff(&pivot);
  double want = xh[pivot] + eps0 * s.pattern.u_field[pivot];
  bool plus = std::abs(st.x[pivot] - want) <= 1e-10;
  double want_m = xh[pivot] - eps0 * s.pattern.u_field[pivot];
  bool minus = std::abs(st.x[pivot] - want_m) <= 1e-10;
  CHECK((plus || minus));
  // genuinely off the trivial branch
  CHECK((st.x - xh).norm() > 1e-3 * xh.norm());
  // tangent is unit in the scaled norm
  CHECK(st.tangent.norm() == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("arclength_step grows the step after success") {
  const auto& s = murray_setup();
  auto st = branch_switch(s.space, *s.model, s.point, s.pattern, 0.01);
  ContinuationOptions opts;
  auto next = arclength_step(s.space, *s.model, st, opts);
  double used = next.arclength - st.arclength;
  CHECK(used == doctest::Approx(st.step));
  CHECK(next.step == doctest::Approx(std::min(opts.ds_grow * used, opts.ds_max)));
  CHECK(next.residual_rms <= opts.newton.tol);
}

TEST_CASE("arclength_step halves on corrector failure") {
  const auto& s = murray_setup();
  auto branch = trace_branch(s.space, *s.model, s.point, s.pattern, 0.01,
                             10.0, 30.0, 8);
  REQUIRE(branch.states.size() == 8);
  auto st = branch.states.back();
  st.step = 0.5;  // oversized predictor
  ContinuationOptions opts;
  // with zero Newton updates a step only succeeds once the predictor itself
  // is on the branch, which forces the halving schedule to kick in
  opts.newton.max_iters = 0;
  opts.newton.max_backtracks = 0;
  auto next = arclength_step(s.space, *s.model, st, opts);
  double used = next.arclength - st.arclength;
  CHECK(used < 0.5);
  // used step comes from repeated halving
  double ratio = 0.5 / used;
  CHECK(std::abs(ratio - std::round(ratio)) < 1e-12);
  CHECK(std::round(std::log2(ratio)) >= 1);
  CHECK(next.step == doctest::Approx(std::min(opts.ds_grow * used, opts.ds_max)));
}

TEST_CASE("trivial branch stays homogeneous") {
  const auto& s = murray_setup();
  const double alpha = 11.0;
  const int n2 = 2 * s.space.n_dof;
  BranchState st;
  st.x = homogeneous_state_vector(s.space, *s.model, alpha);
  st.alpha = alpha;
  st.step = 0.1;
  st.tangent = Vec::Zero(n2 + 1);
  st.tangent[n2] = 1.0;
  ContinuationOptions opts;
  for (int k = 0; k < 3; ++k) {
    st = arclength_step(s.space, *s.model, st, opts);
    Vec xh = homogeneous_state_vector(s.space, *s.model, st.alpha);
    CHECK((st.x - xh).lpNorm<Eigen::Infinity>() <= 1e-8);
  }
  CHECK(st.alpha > alpha);
}

TEST_CASE("trace_branch follows the mode (0,3) branch for 30 steps") {
  const auto& s = murray_setup();
  ContinuationOptions opts;
  auto branch = trace_branch(s.space, *s.model, s.point, s.pattern, 0.01,
                             10.0, 30.0, 32, opts);
  CHECK(branch.failure_note.empty());
  REQUIRE(branch.states.size() >= 30);
  for (size_t i = 0; i < branch.states.size(); ++i) {
    const auto& st = branch.states[i];
    CHECK(st.residual_rms <= 1e-8);
    CHECK(branch.norm_series[i] > 0.0);
    Vec xh = homogeneous_state_vector(s.space, *s.model, st.alpha);
    CHECK((st.x - xh).norm() > opts.divergence_floor * xh.norm());
    if (i > 0) {
      CHECK(branch.states[i].arclength > branch.states[i - 1].arclength);
      // tangent continuity: consecutive tangents never flip
      CHECK(branch.states[i].tangent.dot(branch.states[i - 1].tangent) > 0.0);
    }
  }
  // amplitude grows away from onset
  CHECK(branch.norm_series.back() > 3.0 * branch.norm_series.front());
}

TEST_CASE("pitchfork symmetry of the two jump directions") {
  const auto& s = murray_setup();
  BifurcationPattern mirrored = s.pattern;
  mirrored.u_field = -mirrored.u_field;
  mirrored.v_field = -mirrored.v_field;
  ContinuationOptions opts;
  auto bp = trace_branch(s.space, *s.model, s.point, s.pattern, 0.01, 10.0,
                         30.0, 10, opts);
  auto bm = trace_branch(s.space, *s.model, s.point, mirrored, 0.01, 10.0,
                         30.0, 10, opts);
  REQUIRE(bp.states.size() == 10);
  REQUIRE(bm.states.size() == 10);
  for (size_t i = 0; i < 10; ++i) {
    CHECK(bm.norm_series[i] ==
          doctest::Approx(bp.norm_series[i]).epsilon(0.01));
  }
}

TEST_CASE("trace_branch window excluding origin yields empty branch") {
  const auto& s = murray_setup();
  auto branch =
      trace_branch(s.space, *s.model, s.point, s.pattern, 0.01, 20.0, 30.0, 10);
  CHECK(branch.states.empty());
  CHECK(!branch.failure_note.empty());
}

TEST_CASE("branch CSV writer") {
  const auto& s = murray_setup();
  auto branch = trace_branch(s.space, *s.model, s.point, s.pattern, 0.01,
                             10.0, 30.0, 3);
  REQUIRE(branch.states.size() == 3);
  const std::string path = "branch_test.csv";
  save_branch_csv(branch, path);
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  CHECK(header == "step,alpha,arclength,norm,residual_rms");
  int rows = 0;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) ++rows;
  CHECK(rows == 3);
}
