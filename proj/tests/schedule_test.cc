#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "sflab/errors.h"
#include "sflab/schedule.h"

using namespace sflab;

TEST_CASE("eta follows the step law") {
  const Schedule constant = make_schedule(ConstantStep{0.5}, Uniform{}, 1.0, 1.0);
  CHECK(eta(constant, 7) == 0.5);
  const Schedule linear = make_schedule(LinearGrowthStep{0.1}, Uniform{}, 1.0, 1.0);
  CHECK(eta(linear, 0) == doctest::Approx(0.1).epsilon(1e-15));
  CHECK(eta(linear, 9) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("c returns the weight forming x_{t+1}") {
  const Schedule uni = make_schedule(ConstantStep{1.0}, Uniform{}, 1.0, 1.0);
  CHECK(c(uni, 0) == 1.0);
  CHECK(c(uni, 1) == 0.5);
  const Schedule dec = make_schedule(ConstantStep{1.0}, PolyDecreasing{0.5}, 1.0, 1.0);
  CHECK(c(dec, 3) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(c(dec, 0) == 1.0);
  const Schedule inc = make_schedule(ConstantStep{1.0}, PolyIncreasing{0.5}, 1.0, 1.0);
  CHECK(c(inc, 0) == 0.0);
  // alpha = 0 gives c = 1 everywhere, including t = 0.
  const Schedule inc0 = make_schedule(ConstantStep{1.0}, PolyIncreasing{0.0}, 1.0, 1.0);
  CHECK(c(inc0, 0) == 1.0);
  CHECK(c(inc0, 17) == 1.0);
}

TEST_CASE("beta is constant") {
  for (double b : {1.0, 0.9, 0.0}) {
    const Schedule s = make_schedule(ConstantStep{1.0}, Uniform{}, b, 1.0);
    for (StepIndex t : {0, 3, 5}) CHECK(beta(s, t) == b);
  }
}

TEST_CASE("c stays in [0, 1] with the first-step endpoints") {
  for (double a : {0.0, 0.01, 0.1, 0.5, 1.0, 2.0}) {
    const Schedule dec = make_schedule(ConstantStep{1.0}, PolyDecreasing{a}, 1.0, 1.0);
    CHECK(c(dec, 0) == 1.0);
    for (StepIndex t = 0; t <= 10000; ++t) {
      const double v = c(dec, t);
      REQUIRE(v > 0.0);
      REQUIRE(v <= 1.0);
    }
  }
  for (double a : {0.1, 0.5, 0.9}) {
    const Schedule inc = make_schedule(ConstantStep{1.0}, PolyIncreasing{a}, 1.0, 1.0);
    CHECK(c(inc, 0) == 0.0);
    for (StepIndex t = 1; t <= 10000; ++t) {
      const double v = c(inc, t);
      REQUIRE(v > 0.0);
      REQUIRE(v <= 1.0);
    }
  }
}

TEST_CASE("L eta c <= 1 for constant steps eta <= 1/L") {
  for (double L : {0.5, 1.0, 13.52}) {
    for (double frac : {1.0, 0.5}) {
      for (AvgLaw law : {AvgLaw{Uniform{}}, AvgLaw{PolyDecreasing{0.5}},
                         AvgLaw{PolyDecreasing{2.0}}, AvgLaw{PolyIncreasing{0.5}}}) {
        const Schedule s = make_schedule(ConstantStep{frac / L}, law, 1.0, L);
        for (StepIndex t = 0; t <= 10000; ++t) {
          REQUIRE(s.L_bound * eta(s, t) * c(s, t) <= 1.0 + 1e-15);
        }
      }
    }
  }
  // Linear growth with uniform averaging keeps L eta_t c_{t+1} = L eta0.
  const Schedule lin = make_schedule(LinearGrowthStep{1.0}, Uniform{}, 1.0, 1.0);
  for (StepIndex t = 0; t <= 10000; ++t) {
    REQUIRE(eta(lin, t) * c(lin, t) == doctest::Approx(1.0).epsilon(1e-14));
  }
}

TEST_CASE("PolyDecreasing(1) agrees with Uniform") {
  const Schedule uni = make_schedule(ConstantStep{1.0}, Uniform{}, 1.0, 1.0);
  const Schedule dec = make_schedule(ConstantStep{1.0}, PolyDecreasing{1.0}, 1.0, 1.0);
  double worst = 0.0;
  for (StepIndex t = 0; t <= 10000; ++t) {
    worst = std::max(worst, std::abs(c(uni, t) - c(dec, t)) / c(uni, t));
  }
  CHECK(worst <= 4e-16);
  CHECK(is_uniform_averaging(dec));
}

TEST_CASE("c is monotone in the expected direction") {
  for (double a : {0.01, 0.1, 0.5, 1.0}) {
    const Schedule dec = make_schedule(ConstantStep{1.0}, PolyDecreasing{a}, 1.0, 1.0);
    const Schedule inc = make_schedule(ConstantStep{1.0}, PolyIncreasing{std::min(a, 0.9)}, 1.0, 1.0);
    for (StepIndex t = 0; t < 10000; ++t) {
      REQUIRE(c(dec, t + 1) <= c(dec, t));
      REQUIRE(c(inc, t + 1) >= c(inc, t));
    }
  }
}

TEST_CASE("validate rejects out-of-range parameters") {
  CHECK_THROWS_AS(validate(make_schedule(ConstantStep{-1.0}, Uniform{}, 1.0, 1.0)),
                  ConfigError);
  CHECK_THROWS_AS(validate(make_schedule(ConstantStep{1.0}, Uniform{}, 1.5, 1.0)),
                  ConfigError);
  CHECK_THROWS_AS(validate(make_schedule(ConstantStep{1.0}, PolyDecreasing{-0.1}, 1.0, 1.0)),
                  ConfigError);
  CHECK_THROWS_AS(validate(make_schedule(ConstantStep{1.0}, Uniform{}, 1.0, 0.0)),
                  ConfigError);
  const Schedule inc1 = make_schedule(ConstantStep{1.0}, PolyIncreasing{1.0}, 1.0, 1.0);
  CHECK_THROWS_AS(validate(inc1), ConfigError);
  CHECK_NOTHROW(validate(inc1, /*unsafe=*/true));
  CHECK_NOTHROW(validate(make_schedule(ConstantStep{1.0}, PolyDecreasing{3.0}, 1.0, 1.0)));
}

TEST_CASE("describe names every law") {
  const Schedule s = make_schedule(LinearGrowthStep{0.25}, PolyIncreasing{0.5}, 0.9, 2.0);
  const std::string d = describe(s);
  CHECK(d.find("linear(0.25)") != std::string::npos);
  CHECK(d.find("poly_inc(0.5)") != std::string::npos);
  CHECK(d.find("beta=0.9") != std::string::npos);
}
