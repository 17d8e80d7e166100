#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "rdsurf/models.hpp"

using namespace rdsurf;

TEST_CASE("murray homogeneous states and linearisation") {
  auto m = make_murray();  // D=0.25 C=1.522 N=1 S=1
  auto states = m->homogeneous_states(10.0);
  REQUIRE(states.size() == 2);
  CHECK(states[0].a0 == doctest::Approx(1.0));
  CHECK(states[0].b0 == doctest::Approx(0.5));
  CHECK_FALSE(states[0].is_zero_state);
  CHECK(states[1].is_zero_state);

  const double alpha = 10.0;
  auto c = m->linearize(1.0, 0.5, alpha);
  CHECK(c.uDu == doctest::Approx(0.25));
  CHECK(c.uDv == doctest::Approx(-alpha));
  CHECK(c.vDu == doctest::Approx(0.0));
  CHECK(c.vDv == doctest::Approx(1.0));
  CHECK(c.uKu == doctest::Approx(-1.522));
  CHECK(c.uKv == doctest::Approx(0.0));
  CHECK(c.vKu == doctest::Approx(0.25));
  CHECK(c.vKv == doctest::Approx(-1.0));
  CHECK(m->linearization_affine_in_alpha());

  auto fd = linearize_fd(*m, 1.0, 0.5, alpha);
  CHECK(fd.uKu == doctest::Approx(c.uKu).epsilon(1e-6));
  CHECK(fd.uKv == doctest::Approx(c.uKv).epsilon(1e-6));
  CHECK(fd.vKu == doctest::Approx(c.vKu).epsilon(1e-6));
  CHECK(fd.vKv == doctest::Approx(c.vKv).epsilon(1e-6));
}

TEST_CASE("murray closed-form bifurcation parameter") {
  auto m = make_murray();
  // alpha(Lambda) = Lambda + 7.088 + 6.088 / Lambda at the stock parameters
  for (double L : {0.5, 2.0, 5.5516715975556995}) {
    auto a = m->continuation_closed_form(L);
    REQUIRE(a.has_value());
    CHECK(*a == doctest::Approx(L + 7.088 + 6.088 / L).epsilon(1e-12));
  }
  // mode (0,3) on the 1 x 4 rectangle
  const double pi = 3.14159265358979323846;
  const double lam03 = pi * pi * 9.0 / 16.0;
  CHECK(*m->continuation_closed_form(lam03) == doctest::Approx(13.736).epsilon(1e-3));
}

TEST_CASE("brusselator state and closed form") {
  auto b = make_brusselator();  // D1=.005 D2=.1 B=1.5 C=1.8 D=.375 gamma=1
  auto st = b->homogeneous_states(0.75);
  REQUIRE(st.size() == 1);
  CHECK(st[0].a0 == doctest::Approx(2.0));
  CHECK(st[0].b0 == doctest::Approx(1.5 * 0.375 / (0.75 * 1.8)));
  CHECK_THROWS(b->homogeneous_states(0.0));

  // linearisation at the homogeneous state collapses to the classic entries
  auto c = b->linearize(st[0].a0, st[0].b0, 0.75);
  CHECK(c.uKu == doctest::Approx(1.5 - 0.375));
  CHECK(c.vKu == doctest::Approx(-1.5));
  CHECK(c.uKv == doctest::Approx(1.8 * 4.0));  // Cstar a0^2 with a0 = 2
  CHECK(c.uKv == doctest::Approx(-c.vKv));
  CHECK_FALSE(b->linearization_affine_in_alpha());

  auto a = b->continuation_closed_form(75.0);
  REQUIRE(a.has_value());
  const double num = 0.1 * (1.5 - 0.375) * 75.0 - 0.005 * 0.1 * 75.0 * 75.0;
  const double den = 1.8 * (0.005 * 75.0 + 0.375);
  CHECK(*a == doctest::Approx(0.375 * std::sqrt(num / den)).epsilon(1e-12));

  // reaction-scale invariance: gamma scales the eigenvalue argument
  auto bg = b->with_parameter("gamma", 4.0);
  CHECK(*bg->continuation_closed_form(4.0 * 75.0) == doctest::Approx(*a).epsilon(1e-12));
}

TEST_CASE("stability preconditions") {
  LinearCoefficients ok{0.25, 0, 0, 1, -1.522, 0, 0.25, -1};
  CHECK(stability_preconditions(ok).satisfied);
  LinearCoefficients bad_tr = ok;
  bad_tr.uKu = 2.0;
  auto s1 = stability_preconditions(bad_tr);
  CHECK_FALSE(s1.satisfied);
  CHECK(s1.which == StabilityViolation::Trace);
  LinearCoefficients bad_det = ok;
  bad_det.uKv = 10.0;
  bad_det.vKu = 1.0;
  auto s2 = stability_preconditions(bad_det);
  CHECK_FALSE(s2.satisfied);
  CHECK(s2.which == StabilityViolation::Determinant);
}

TEST_CASE("growth rate and dispersion") {
  auto m = make_murray();
  auto h = m->primary_state(0);
  // the closed form inverts the zero-growth condition
  const double lam = 2.0;
  const double alpha_b = *m->continuation_closed_form(lam);
  auto c_at = [&](double alpha) { return m->linearize(h.a0, h.b0, alpha); };
  CHECK(std::abs(growth_rate(c_at(alpha_b), lam)) < 1e-10);
  CHECK(growth_rate(c_at(alpha_b - 0.5), lam) < 0);
  CHECK(growth_rate(c_at(alpha_b + 0.5), lam) > 0);

  // at the first bifurcation exactly one eigenvalue group reaches zero
  const double lam_min = std::sqrt(6.088);  // argmin of the closed form
  const double alpha_first = *m->continuation_closed_form(lam_min);
  std::vector<double> lams = {0.61685, 2.4674, 5.5517, 9.8696};
  auto disp = dispersion_curve(c_at(alpha_first), 0.01, 12.0, 200, lams);
  CHECK(disp.unstable.size() <= 1);
  auto below = dispersion_curve(c_at(alpha_first - 0.3), 0.01, 12.0, 200, lams);
  CHECK(below.unstable.empty());

  // larger alpha raises the peak growth
  double peak1 = -1e30, peak2 = -1e30, peak3 = -1e30;
  for (auto& [l, xi] : dispersion_curve(c_at(13.0), 0.1, 12, 300).samples) peak1 = std::max(peak1, xi);
  for (auto& [l, xi] : dispersion_curve(c_at(15.0), 0.1, 12, 300).samples) peak2 = std::max(peak2, xi);
  for (auto& [l, xi] : dispersion_curve(c_at(17.0), 0.1, 12, 300).samples) peak3 = std::max(peak3, xi);
  CHECK(peak1 < peak2);
  CHECK(peak2 < peak3);
}

TEST_CASE("marginal curve scaling") {
  auto b = make_brusselator();
  const double lam_unit = 75.0;
  auto samples = marginal_curve(*b, lam_unit, {1.0, 1.5, 2.0});
  REQUIRE(samples.size() == 3);
  CHECK(samples[0].gamma == doctest::Approx(1.0));
  CHECK(samples[0].valid);
  CHECK(samples[0].parameter == doctest::Approx(*b->continuation_closed_form(lam_unit)).epsilon(1e-12));
  // each scale evaluates the closed form at Lambda / gamma
  for (const auto& s : samples) {
    auto expect = b->continuation_closed_form(lam_unit / (s.scale * s.scale));
    if (expect) {
      CHECK(s.valid);
      CHECK(s.parameter == doctest::Approx(*expect).epsilon(1e-12));
    } else {
      CHECK_FALSE(s.valid);
    }
  }
}

TEST_CASE("model factory and parameters") {
  auto m = make_model("murray", {{"alpha", 12.0}, {"D", 0.3}});
  CHECK(m->parameter("alpha") == doctest::Approx(12.0));
  CHECK(m->parameter("D") == doctest::Approx(0.3));
  CHECK(m->parameter("C") == doctest::Approx(1.522));
  CHECK(m->continuation_parameter() == "alpha");
  CHECK(m->boundary_condition() == BC::NeumannZero);
  auto b = make_model("brusselator", {});
  CHECK(b->boundary_condition() == BC::DirichletZero);
  CHECK_THROWS(make_model("oregonator", {}));
  CHECK_THROWS(m->parameter("nope"));
}
