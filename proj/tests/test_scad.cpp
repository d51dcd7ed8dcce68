#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "dpmle/scad.hpp"

using namespace dpmle;

TEST_CASE("scad derivative piecewise values") {
  // M = 1, lambda = 1, a = 3.7
  CHECK(scad_derivative(0.5, 1.0, 1.0, 3.7) == doctest::Approx(1.0));
  CHECK(scad_derivative(4.0, 1.0, 1.0, 3.7) == 0.0);
  CHECK(scad_derivative(2.0, 1.0, 1.0, 3.7) == doctest::Approx((3.7 - 2.0) / 2.7));
  // exact zero at and beyond a*lambda
  CHECK(scad_derivative(3.7, 1.0, 1.0, 3.7) == 0.0);
  CHECK(scad_derivative(100.0, 1.0, 1.0, 3.7) == 0.0);
  // sample-size weight scales linearly
  CHECK(scad_derivative(0.5, 1.0, 10.0, 3.7) == doctest::Approx(10.0));
}

TEST_CASE("scad value piecewise values") {
  CHECK(scad_value(0.0, 1.0, 1.0, 3.7) == 0.0);
  CHECK(scad_value(1.0, 1.0, 1.0, 3.7) == doctest::Approx(1.0));
  CHECK(scad_value(10.0, 1.0, 1.0, 3.7) == doctest::Approx((3.7 + 1.0) / 2.0));
  // flat beyond a*lambda
  CHECK(scad_value(3.7, 1.0, 1.0, 3.7) == doctest::Approx(2.35));
  CHECK(scad_value(50.0, 1.0, 1.0, 3.7) == doctest::Approx(2.35));
}

TEST_CASE("scad value is continuous and nondecreasing") {
  const double lambda = 0.8, m = 3.0, a = 3.7;
  double prev = 0.0;
  for (int i = 1; i <= 2000; ++i) {
    const double eta = 5.0 * i / 2000.0;
    const double v = scad_value(eta, lambda, m, a);
    CHECK(v >= prev - 1e-14);
    prev = v;
  }
  // continuity at the kinks
  const double eps = 1e-10;
  CHECK(scad_value(lambda + eps, lambda, m, a) ==
        doctest::Approx(scad_value(lambda - eps, lambda, m, a)).epsilon(1e-7));
  CHECK(scad_value(a * lambda + eps, lambda, m, a) ==
        doctest::Approx(scad_value(a * lambda - eps, lambda, m, a)).epsilon(1e-7));
}

TEST_CASE("finite differences of scad_value match scad_derivative") {
  const double lambda = 1.3, m = 2.0, a = 3.7;
  const double h = 1e-7;
  for (int i = 0; i <= 600; ++i) {
    const double eta = 6.0 * i / 600.0 + 0.01;
    // skip neighbourhoods of the kinks
    if (std::fabs(eta - lambda) < 1e-3 || std::fabs(eta - a * lambda) < 1e-3) continue;
    const double fd = (scad_value(eta + h, lambda, m, a) - scad_value(eta - h, lambda, m, a)) /
                      (2.0 * h);
    CHECK(fd == doctest::Approx(scad_derivative(eta, lambda, m, a)).epsilon(1e-6));
  }
}

TEST_CASE("scad rejects negative eta") {
  CHECK_THROWS_AS(scad_derivative(-0.1, 1.0, 1.0, 3.7), numeric_error);
  CHECK_THROWS_AS(scad_value(-0.1, 1.0, 1.0, 3.7), numeric_error);
}

TEST_CASE("zero lambda turns the penalty off") {
  CHECK(scad_value(2.0, 0.0, 5.0, 3.7) == 0.0);
  CHECK(scad_derivative(2.0, 0.0, 5.0, 3.7) == 0.0);
}

TEST_CASE("penalty config validation") {
  PenaltyConfig p;
  p.lambda = 1.0;
  CHECK_NOTHROW(p.validate());
  p.a = 2.0;
  CHECK_THROWS_AS(p.validate(), config_error);
  p.a = 3.7;
  p.c_n = 0.0;
  CHECK_THROWS_AS(p.validate(), config_error);
}
