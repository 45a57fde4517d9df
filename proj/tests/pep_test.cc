#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>

#include "sflab/errors.h"
#include "sflab/pep.h"

#include "oracles.h"

using namespace sflab;
using namespace sflab::pep;

namespace {

double solve_value(const Scenario& s, int n, double L, double D, BuildOptions o = {}) {
  const PepCertificate c = solve(build(s, n, L, D, o));
  REQUIRE(c.status == CertificateStatus::Optimal);
  return c.value;
}

}  // namespace

TEST_CASE("names round-trip") {
  for (auto k : {ScenarioKind::DecC, ScenarioKind::IncC, ScenarioKind::LinStepGrad,
                 ScenarioKind::LinStepDist}) {
    CHECK(parse_scenario_kind(to_string(k)) == k);
  }
  for (auto m : {Metric::LastGradSq, Metric::MinGradSq, Metric::MaxGradSq, Metric::LastDistSq}) {
    CHECK(parse_metric(to_string(m)) == m);
  }
  CHECK_THROWS_AS(parse_metric("bogus"), ConfigError);
  CHECK_THROWS_AS(scenario_schedule({ScenarioKind::IncC, 1.0}, 1.0), ConfigError);
  CHECK_THROWS_AS(scenario_schedule({ScenarioKind::DecC, -0.5}, 1.0), ConfigError);
}

TEST_CASE("affine unrolling of the iterates") {
  // DecC(1), n = 1: c_1 = 1 collapses to one gradient step x1 = x0 - g0/L.
  const PepProblem p1 = build({ScenarioKind::DecC, 1.0}, 1, 2.0, 1.0);
  REQUIRE(p1.basis.size() == 2);
  CHECK(p1.x[1][0] == doctest::Approx(-0.5));
  CHECK(p1.x[1] == p1.z[1]);
  // LinStepDist, n = 2: z2 = x0 - g0/L - 2 g1/L and x2 = x1/2 + z2/2.
  const double L = 2.0;
  const PepProblem p = build({ScenarioKind::LinStepDist, 0.0}, 2, L, 1.0);
  REQUIRE(p.basis.size() == 3);
  CHECK(p.z[2][0] == doctest::Approx(-1.0 / L));
  CHECK(p.z[2][1] == doctest::Approx(-2.0 / L));
  const Eigen::VectorXd expect = 0.5 * p.x[1] + 0.5 * p.z[2];
  CHECK((p.x[2] - expect).norm() <= 1e-15);
  // IncC: c_1 = 0 keeps x1 = x0, so the two points coincide.
  const PepProblem pi = build({ScenarioKind::IncC, 0.5}, 1, 1.0, 1.0);
  CHECK(pi.point_of_x[0] == pi.point_of_x[1]);
}

TEST_CASE("degenerate horizons") {
  BuildOptions anchored;
  anchored.metric = Metric::LastGradSq;
  anchored.initial = InitialCondition::OptimalityGap;
  for (auto [L, D] : {std::pair{1.0, 1.0}, std::pair{2.0, 0.5}}) {
    CHECK(solve_value({ScenarioKind::DecC, 1.0}, 0, L, D, anchored) ==
          doctest::Approx(2 * L * D).epsilon(1e-6));
  }
  BuildOptions last;
  last.metric = Metric::LastGradSq;
  const PepCertificate c = solve(build({ScenarioKind::DecC, 1.0}, 0, 1.0, 1.0, last));
  CHECK(c.status == CertificateStatus::Unbounded);
  CHECK(std::isinf(c.value));
  CHECK_THROWS_AS(build({ScenarioKind::DecC, 1.0}, -1, 1.0, 1.0), ConfigError);
}

TEST_CASE("one step worst case matches the witness oracle") {
  const double oracle = oracles::one_step_witness(1.0, 1.0);
  CHECK(oracle == doctest::Approx(8.0 / 3.0).epsilon(1e-6));
  const double tau = solve_value({ScenarioKind::DecC, 1.0}, 1, 1.0, 1.0);
  CHECK(std::abs(tau - oracle) / oracle <= 1e-4);
  const double oracle2 = oracles::one_step_witness(2.0, 0.5);
  CHECK(std::abs(solve_value({ScenarioKind::DecC, 1.0}, 1, 2.0, 0.5) - oracle2) / oracle2 <= 1e-4);
}

TEST_CASE("monotone and linear in D") {
  for (const Scenario s : {Scenario{ScenarioKind::DecC, 1.0}, Scenario{ScenarioKind::DecC, 0.5},
                           Scenario{ScenarioKind::IncC, 0.5}, Scenario{ScenarioKind::LinStepGrad, 0}}) {
    // IncC starts with c_1 = 0, so one step never moves x and the n = 1
    // problem is unbounded; its scaling is checked from n = 2.
    for (int n = s.kind == ScenarioKind::IncC ? 2 : 1; n <= 3; ++n) {
      CAPTURE(to_string(s));
      CAPTURE(n);
      const double t05 = solve_value(s, n, 1.0, 0.5);
      const double t1 = solve_value(s, n, 1.0, 1.0);
      const double t2 = solve_value(s, n, 1.0, 2.0);
      CHECK(t05 <= t1 + 1e-7);
      CHECK(t1 <= t2 + 1e-7);
      CHECK(std::abs(t2 - 2 * t1) <= 1e-5 * std::max(1.0, t2));
    }
  }
  CHECK(solve(build({ScenarioKind::IncC, 0.5}, 1, 1.0, 1.0)).status == CertificateStatus::Unbounded);
  // D = 0: no decrease allowed; the value collapses to zero.
  CHECK(std::abs(solve_value({ScenarioKind::DecC, 1.0}, 2, 1.0, 0.0)) <= 1e-6);
}

TEST_CASE("worst-case minimum is nonincreasing in the horizon") {
  for (const Scenario s : {Scenario{ScenarioKind::DecC, 1.0}, Scenario{ScenarioKind::DecC, 0.1}}) {
    double prev = std::numeric_limits<double>::infinity();
    for (int n = 1; n <= 10; ++n) {
      const double v = solve_value(s, n, 1.0, 1.0);
      CHECK(v <= prev * (1 + 1e-6) + 1e-8);
      prev = v;
    }
  }
}

TEST_CASE("convex class is no worse than the nonconvex class") {
  BuildOptions convex;
  convex.function_class = FunctionClass::SmoothConvex;
  for (int n = 1; n <= 5; ++n) {
    const double nc = solve_value({ScenarioKind::DecC, 1.0}, n, 1.0, 1.0);
    const double cv = solve_value({ScenarioKind::DecC, 1.0}, n, 1.0, 1.0, convex);
    CHECK(cv <= nc * (1 + 1e-6) + 1e-8);
  }
}

TEST_CASE("alpha = 0 coincides for both weight laws") {
  const auto dec = curve({ScenarioKind::DecC, 0.0}, 6, 1.0, 1.0, {}, {});
  const auto inc = curve({ScenarioKind::IncC, 0.0}, 6, 1.0, 1.0, {}, {});
  for (int i = 0; i < 6; ++i) {
    CHECK(dec[i].tau == doctest::Approx(inc[i].tau).epsilon(1e-6));
  }
}

TEST_CASE("distance metric vanishes after the first step") {
  BuildOptions dist;
  dist.metric = Metric::LastDistSq;
  CHECK(std::abs(solve_value({ScenarioKind::LinStepDist, 0.0}, 1, 1.0, 1.0, dist)) <= 1e-7);
}

TEST_CASE("metric variants are ordered") {
  for (int n : {2, 4}) {
    BuildOptions o;
    o.metric = Metric::MinGradSq;
    const double mn = solve_value({ScenarioKind::DecC, 1.0}, n, 1.0, 1.0, o);
    o.metric = Metric::LastGradSq;
    const double last = solve_value({ScenarioKind::DecC, 1.0}, n, 1.0, 1.0, o);
    o.metric = Metric::MaxGradSq;
    const double mx = solve_value({ScenarioKind::DecC, 1.0}, n, 1.0, 1.0, o);
    CHECK(mn <= last * (1 + 1e-6));
    CHECK(last <= mx * (1 + 1e-6));
  }
}

TEST_CASE("figure weights") {
  CHECK(figure_weight({ScenarioKind::DecC, 1.0}, 7) == 1.0);
  CHECK(figure_weight({ScenarioKind::DecC, 0.5}, 4) == doctest::Approx(2.0));
  CHECK(figure_weight({ScenarioKind::IncC, 0.0}, 3) == doctest::Approx(1.0));
  CHECK(std::isnan(figure_weight({ScenarioKind::IncC, 0.0}, 2)));
  CHECK(figure_weight({ScenarioKind::LinStepGrad, 0.0}, 4) == doctest::Approx(5.0 / std::log(5.0)));
  CHECK(figure_weight({ScenarioKind::LinStepDist, 0.0}, 9) == 1.0);
}

TEST_CASE("curve ordering, limits and solver selection") {
  SolverConfig cfg;
  const auto pts = curve({ScenarioKind::DecC, 1.0}, 5, 1.0, 1.0, {}, cfg, 2);
  REQUIRE(pts.size() == 5);
  for (int i = 0; i < 5; ++i) CHECK(pts[i].t == i + 1);
  cfg.max_n = 4;
  CHECK_THROWS_AS(curve({ScenarioKind::DecC, 1.0}, 5, 1.0, 1.0, {}, cfg), ConfigError);
  SolverConfig bad;
  bad.solver = "mosek";
  CHECK_THROWS_AS(solve(build({ScenarioKind::DecC, 1.0}, 1, 1.0, 1.0), bad), ConfigError);
}

TEST_CASE("concrete runs never beat the certificate") {
  for (const Scenario s : {Scenario{ScenarioKind::DecC, 1.0}, Scenario{ScenarioKind::IncC, 0.5}}) {
    const PepProblem p = build(s, 3, 1.0, 1.0);
    const PepCertificate c = solve(p);
    REQUIRE(c.status == CertificateStatus::Optimal);
    const SoundnessReport r = sample_soundness(p, c, 200, 1);
    CHECK(r.samples + r.skipped == 200);
    CHECK(r.samples > 100);
    CHECK(r.max_excess <= 1e-6);
  }
}
