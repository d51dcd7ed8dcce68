#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "dpmle/transitions.hpp"
#include "dpmle/rng.hpp"
#include "helpers.hpp"

using namespace dpmle;
using testutil::make_tpm;

TEST_CASE("logit tpm with zero coefficients is uniform") {
  CovariateLogit m = CovariateLogit::zeros(3, 2);
  const std::vector<double> w{0.4, -1.2};
  const Matrix g = transition_matrix_at(m, std::span<const double>(w));
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) CHECK(g(i, j) == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("homogeneous model returns its tpm unchanged") {
  const Matrix g = make_tpm({{0.8, 0.1, 0.1}, {0.1, 0.8, 0.1}, {0.1, 0.1, 0.8}});
  const TransitionModel m = Homogeneous{g};
  CHECK(transition_matrix_at(m) == g);
}

TEST_CASE("two-state logit with one covariate, hand-evaluated") {
  // beta^12 = (0, 1), beta^21 = (0, 0), w = ln 2:
  // c12 = ln 2 -> gamma_12 = 2/3; row 2 stays uniform
  CovariateLogit m = CovariateLogit::zeros(2, 1);
  m.cell(0, 1)[0] = 0.0;
  m.cell(0, 1)[1] = 1.0;
  const std::vector<double> w{std::log(2.0)};
  const Matrix g = transition_matrix_at(m, std::span<const double>(w));
  CHECK(g(0, 1) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(g(0, 0) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(g(1, 0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(g(1, 1) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("logit tpm rows are stochastic for random coefficients") {
  Rng rng(42);
  for (int rep = 0; rep < 200; ++rep) {
    const std::size_t n = 2 + rng.uniform_index(4);
    const std::size_t c = rng.uniform_index(3);
    CovariateLogit m = CovariateLogit::zeros(n, c);
    for (double& b : m.beta) b = rng.uniform(-20.0, 20.0);
    std::vector<double> w(c);
    for (double& x : w) x = rng.uniform(-30.0, 30.0);
    const Matrix g = transition_matrix_at(m, std::span<const double>(w));
    for (std::size_t i = 0; i < n; ++i) {
      double row = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        CHECK(g(i, j) >= 0.0);
        CHECK(g(i, j) <= 1.0);
        row += g(i, j);
      }
      CHECK(row == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("covariate row errors") {
  CovariateLogit m = CovariateLogit::zeros(3, 2);
  const std::vector<double> w{1.0};
  CHECK_THROWS_AS(transition_matrix_at(m, std::span<const double>(w)), dimension_error);
  CHECK_THROWS_AS(transition_matrix_at(m), dimension_error);
  m.beta[0] = std::nan("");
  const std::vector<double> w2{1.0, 2.0};
  CHECK_THROWS_AS(transition_matrix_at(m, std::span<const double>(w2)), numeric_error);
}

TEST_CASE("stationary distribution of the symmetric 3-state tpm") {
  const Matrix g = make_tpm({{0.8, 0.1, 0.1}, {0.1, 0.8, 0.1}, {0.1, 0.1, 0.8}});
  const auto pi = stationary_distribution(g);
  for (double p : pi) CHECK(p == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("stationary distribution of a 2-state chain, hand-solved") {
  // balance: 0.1*pi1 = 0.5*pi2 -> pi = (5/6, 1/6)
  const Matrix g = make_tpm({{0.9, 0.1}, {0.5, 0.5}});
  const auto pi = stationary_distribution(g);
  CHECK(pi[0] == doctest::Approx(5.0 / 6.0).epsilon(1e-12));
  CHECK(pi[1] == doctest::Approx(1.0 / 6.0).epsilon(1e-12));
}

TEST_CASE("stationary distribution satisfies the fixed point on random tpms") {
  Rng rng(7);
  for (int rep = 0; rep < 300; ++rep) {
    const std::size_t n = 2 + rng.uniform_index(6);
    Matrix g(n, n);
    for (std::size_t i = 0; i < n; ++i) {
      double row = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        g(i, j) = 0.02 + rng.uniform();
        row += g(i, j);
      }
      for (std::size_t j = 0; j < n; ++j) g(i, j) /= row;
    }
    const auto pi = stationary_distribution(g);
    double sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      double pg = 0.0;
      for (std::size_t i = 0; i < n; ++i) pg += pi[i] * g(i, j);
      CHECK(std::fabs(pg - pi[j]) < 1e-12);
      CHECK(pi[j] > 0.0);
      sum += pi[j];
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("reducible chain raises a singularity error") {
  const Matrix g = make_tpm({{1.0, 0.0}, {0.0, 1.0}});
  CHECK_THROWS_AS(stationary_distribution(g), singularity_error);
}

TEST_CASE("merged logit tpm averages rows of the full tpm") {
  CovariateLogit base = CovariateLogit::zeros(4, 0);
  MergedLogit merged{base, {{0, 1}, {2, 3}}};
  const std::vector<double> w{};
  const Matrix g = transition_matrix_at(TransitionModel(merged), std::span<const double>(w));
  REQUIRE(g.rows() == 2);
  // uniform 4x4 (all 0.25) -> merged entries 0.5
  CHECK(g(0, 0) == doctest::Approx(0.5));
  CHECK(g(0, 1) == doctest::Approx(0.5));
  CHECK(g(1, 0) == doctest::Approx(0.5));
}
