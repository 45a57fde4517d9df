#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "sflab/errors.h"
#include "sflab/optimizer.h"
#include "sflab/problem.h"
#include "sflab/schedule.h"

using namespace sflab;
using Vec = Vector<double>;

namespace {

Vec scalar_vec(double v) { return Vec::Constant(1, v); }

// Independent scalar re-implementation of the three-sequence iteration on
// f(x) = (L/2) x^2 with long double arithmetic, written from the update
// equations rather than through the library.
std::vector<long double> oracle_quad_x(long double L, long double eta_c,
                                       long double alpha_dec, int T) {
  std::vector<long double> xs;
  long double x = 1.0L, z = 1.0L;
  xs.push_back(x);
  for (int t = 0; t < T; ++t) {
    const long double y = x;  // beta = 1
    z = z - eta_c * L * y;
    const long double w = std::pow(static_cast<long double>(t + 1), -alpha_dec);
    x = (1.0L - w) * x + w * z;
    xs.push_back(x);
  }
  return xs;
}

}  // namespace

TEST_CASE("hand-computed quadratic run") {
  const auto q = quad<double>(1, 1.0);
  const Schedule s = make_schedule(ConstantStep{0.5}, Uniform{}, 1.0, 1.0);
  SfState<double> st = initial_state(scalar_vec(1.0));
  auto oracle = [&](const Vec& y, StepIndex) { return grad(q, y); };
  st = sf_step(st, s, oracle);
  CHECK(st.x[0] == 0.5);
  CHECK(st.z[0] == 0.5);
  st = sf_step(st, s, oracle);
  CHECK(st.z[0] == 0.25);
  CHECK(st.x[0] == 0.375);
  CHECK(st.z[0] - st.x[0] == -0.125);

  const auto tr = run(q, no_noise(), s, scalar_vec(1.0), 2);
  REQUIRE(tr.x.size() == 3);
  CHECK(tr.x[0][0] == 1.0);
  CHECK(tr.x[1][0] == 0.5);
  CHECK(tr.x[2][0] == 0.375);
  CHECK(tr.g.size() == 2);
  CHECK(tr.delta_norm_sq(2) == doctest::Approx(0.015625).epsilon(1e-15));
}

TEST_CASE("beta endpoints place y at x or z") {
  const auto q = quad<double>(2, 1.0);
  Vec x0(2);
  x0 << 1.0, -2.0;
  const auto pr = run(q, no_noise(),
                      make_schedule(ConstantStep{0.5}, Uniform{}, 0.0, 1.0), x0, 5);
  for (StepIndex t = 0; t < 5; ++t) CHECK(pr.y[t] == pr.z[t]);
  const auto sf = run(q, no_noise(),
                      make_schedule(ConstantStep{0.5}, PolyDecreasing{0.5}, 1.0, 1.0), x0, 5);
  for (StepIndex t = 0; t < 5; ++t) CHECK(sf.y[t] == sf.x[t]);
}

TEST_CASE("run matches an independent long-double oracle") {
  for (double a : {1.0, 0.5, 0.1}) {
    const auto q = quad<double>(1, 1.0);
    const auto tr = run(q, no_noise(),
                        make_schedule(ConstantStep{0.7}, PolyDecreasing{a}, 1.0, 1.0),
                        scalar_vec(1.0), 200);
    const auto ref = oracle_quad_x(1.0L, 0.7L, a, 200);
    for (int t = 0; t <= 200; ++t) {
      REQUIRE(std::abs(tr.x[t][0] - static_cast<double>(ref[t])) <= 1e-14);
    }
  }
}

TEST_CASE("run records consistent fields and is deterministic") {
  for (const auto& p : builtin_suite<double>(3)) {
    CAPTURE(p.name);
    const Schedule s = make_schedule(ConstantStep{1.0 / p.L}, Uniform{}, 0.9, p.L);
    const NoiseModel n = gaussian_noise(0.01, 3);
    const auto a = run(p, n, s, p.x0_hint, 3);
    const auto b = run(p, n, s, p.x0_hint, 3);
    CHECK(a.x.size() == 4);
    CHECK(a.y.size() == 3);
    CHECK(a.f_x.size() == 4);
    for (std::size_t t = 0; t < a.x.size(); ++t) {
      CHECK(a.x[t] == b.x[t]);
      CHECK(a.z[t] == b.z[t]);
      CHECK(a.delta(t) == a.z[t] - a.x[t]);
      CHECK(a.f_x[t] == value(p, a.x[t]));
    }
    CHECK(a.x[0] == a.z[0]);
  }
}

TEST_CASE("quadratic converges under eta = 1/L") {
  const auto q = quad<double>(3, 1.0);
  const auto tr = run(q, no_noise(), make_schedule(ConstantStep{1.0}, Uniform{}, 1.0, 1.0),
                      Vec(Vec::Ones(3)), 1000);
  CHECK(tr.f_x.back() <= 1e-6);
}

TEST_CASE("step precondition and horizon validation") {
  const auto q = quad<double>(1, 1.0);
  const Schedule bad = make_schedule(ConstantStep{1.5}, Uniform{}, 1.0, 1.0);
  CHECK_THROWS_AS(run(q, no_noise(), bad, scalar_vec(1.0), 3), ConfigError);
  CHECK_NOTHROW(run(q, no_noise(), bad, scalar_vec(1.0), 3, RunOptions{true}));
  const Schedule ok = make_schedule(ConstantStep{1.0}, Uniform{}, 1.0, 1.0);
  CHECK_THROWS_AS(run(q, no_noise(), ok, scalar_vec(1.0), 0), ConfigError);
  CHECK_THROWS_AS(run(q, no_noise(), ok, Vec(Vec::Ones(2)), 3), ConfigError);
}

TEST_CASE("non-finite gradients abort the run") {
  Problem<double> p = quad<double>(1, 1.0);
  p.gradient = [](const Vec& x) -> Vec { return x * std::numeric_limits<double>::quiet_NaN(); };
  CHECK_THROWS_AS(run(p, no_noise(), make_schedule(ConstantStep{1.0}, Uniform{}, 1.0, 1.0),
                      scalar_vec(1.0), 3),
                  NumericalError);
}

TEST_CASE("parameter maps") {
  const Schedule s = make_schedule(ConstantStep{0.5}, Uniform{}, 1.0, 1.0);
  const auto sg = sgdm_params_from_spa(s, 10);
  const auto hb = shbm_params_from_spa(s, 10);
  for (StepIndex t = 0; t < 10; ++t) {
    CHECK(sg.lambda[t] == doctest::Approx(0.5 / (t + 1)).epsilon(1e-15));
    CHECK(hb.lambda[t] == doctest::Approx(0.5 / (t + 1)).epsilon(1e-15));
    if (t >= 1) {
      CHECK(sg.theta[t] == doctest::Approx((t - 1.0) / t).epsilon(1e-15));
      CHECK(hb.theta[t] == doctest::Approx((t - 1.0) / (t + 1.0)).epsilon(1e-15));
    }
  }
  CHECK(sg.theta[1] == 0.0);
  CHECK(hb.theta[1] == 0.0);
  // Increasing weights start at c_1 = 0, which the SHBM map divides by.
  const Schedule inc = make_schedule(ConstantStep{0.5}, PolyIncreasing{0.5}, 1.0, 1.0);
  try {
    shbm_params_from_spa(inc, 5);
    FAIL("expected MapInfeasible");
  } catch (const MapInfeasible& e) {
    CHECK(e.step() == 1);
  }
  // Linear growth with uniform weights keeps theta_t = (t-1)/(t+1).
  const Schedule lin = make_schedule(LinearGrowthStep{0.5}, Uniform{}, 1.0, 1.0);
  const auto sl = sgdm_params_from_spa(lin, 6);
  for (StepIndex t = 1; t < 6; ++t) {
    CHECK(sl.theta[t] == doctest::Approx((t - 1.0) / (t + 1.0)).epsilon(1e-15));
  }
  // Nondecreasing steps keep theta_t = eta_{t-1}(1 - c_t)/eta_t inside [0, 1].
  const Schedule lin_dec = make_schedule(LinearGrowthStep{0.01}, PolyDecreasing{0.1}, 1.0, 1.0);
  const auto sd = sgdm_params_from_spa(lin_dec, 50);
  for (StepIndex t = 1; t < 50; ++t) {
    CHECK(sd.theta[t] == doctest::Approx(t / (t + 1.0) * (1.0 - std::pow(t, -0.1))).epsilon(1e-14));
  }
}

TEST_CASE("mapped momentum runs reproduce the hand-run") {
  const auto q = quad<double>(1, 1.0);
  const Schedule s = make_schedule(ConstantStep{0.5}, Uniform{}, 1.0, 1.0);
  const auto sg = run_sgdm(q, no_noise(), sgdm_params_from_spa(s, 2), scalar_vec(1.0), 2);
  CHECK(sg.x[1][0] == 0.5);
  CHECK(sg.x[2][0] == 0.375);
  const auto hb = run_shbm(q, no_noise(), shbm_params_from_spa(s, 2), scalar_vec(1.0), 2);
  CHECK(hb.x[2][0] == 0.375);
  // Momentum off is plain gradient descent.
  SgdmParams gd{std::vector<double>(4, 0.0), std::vector<double>(4, 0.5)};
  const auto g = run_sgdm(q, no_noise(), gd, scalar_vec(1.0), 4);
  for (int t = 0; t <= 4; ++t) CHECK(g.x[t][0] == std::pow(0.5, t));
}

TEST_CASE("equivalence of SF with the mapped momentum forms") {
  for (const auto& p : builtin_suite<double>(3)) {
    for (double frac : {1.0, 0.5}) {
      for (AvgLaw law : {AvgLaw{Uniform{}}, AvgLaw{PolyDecreasing{0.5}}}) {
        for (double sigma2 : {0.0, 0.01}) {
          CAPTURE(p.name);
          CAPTURE(frac);
          CAPTURE(sigma2);
          const Schedule s = make_schedule(ConstantStep{frac / p.L}, law, 1.0, p.L);
          const NoiseModel n = gaussian_noise(sigma2, 99);
          const auto sf = run(p, n, s, p.x0_hint, 200);
          const auto sg = run_sgdm(p, n, sgdm_params_from_spa(s, 200), p.x0_hint, 200);
          const auto hb = run_shbm(p, n, shbm_params_from_spa(s, 200), p.x0_hint, 200);
          CHECK(max_relative_deviation(sf, sg) <= 1e-9);
          CHECK(max_relative_deviation(sf, hb) <= 1e-9);
        }
      }
    }
  }
  const auto q = quad<double>(1, 1.0);
  const Schedule s = make_schedule(ConstantStep{0.5}, Uniform{}, 1.0, 1.0);
  const auto sf = run(q, no_noise(), s, scalar_vec(1.0), 100);
  CHECK(max_relative_deviation(sf, run_sgdm(q, no_noise(), sgdm_params_from_spa(s, 100),
                                            scalar_vec(1.0), 100)) <= 1e-12);
  CHECK(max_relative_deviation(sf, run_shbm(q, no_noise(), shbm_params_from_spa(s, 100),
                                            scalar_vec(1.0), 100)) <= 1e-12);
}

TEST_CASE("discrepancy recursion holds along every run") {
  for (const auto& p : builtin_suite<double>(3)) {
    for (double b : {1.0, 0.5, 0.0}) {
      const Schedule s = make_schedule(ConstantStep{1.0 / p.L}, PolyDecreasing{0.5}, b, p.L);
      const auto tr = run(p, gaussian_noise(0.01, 5), s, p.x0_hint, 300);
      for (StepIndex t = 0; t < tr.T; ++t) {
        const Vec pred = (1.0 - c(s, t)) * (tr.delta(t) - eta(s, t) * tr.g[t]);
        const double scale = std::max({1.0, tr.x[t + 1].lpNorm<Eigen::Infinity>(),
                                       tr.z[t + 1].lpNorm<Eigen::Infinity>()});
        REQUIRE((tr.delta(t + 1) - pred).lpNorm<Eigen::Infinity>() / scale <= 1e-12);
      }
    }
  }
}
