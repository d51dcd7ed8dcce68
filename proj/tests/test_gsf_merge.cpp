#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "dpmle/penalized_em.hpp"
#include "helpers.hpp"

using namespace dpmle;
using testutil::make_tpm;

TEST_CASE("1-D GSF ordering is an ascending sort") {
  const std::vector<std::vector<double>> mus{{3.0}, {1.0}, {2.0}};
  const auto tau = gsf_order(mus);
  CHECK(tau == std::vector<std::size_t>{1, 2, 0});
  // values along the chain ascend
  CHECK(mus[tau[0]][0] < mus[tau[1]][0]);
  CHECK(mus[tau[1]][0] < mus[tau[2]][0]);
}

TEST_CASE("2-D GSF follows the nearest-neighbour chain") {
  const std::vector<std::vector<double>> mus{{0.0, 0.0}, {3.0, 4.0}, {1.0, 1.0}};
  const auto tau = gsf_order(mus);
  CHECK(tau == std::vector<std::size_t>{0, 2, 1});  // (0,0) -> (1,1) -> (3,4)
}

TEST_CASE("GSF with one state is the identity") {
  CHECK(gsf_order({{4.2}}) == std::vector<std::size_t>{0});
}

TEST_CASE("GSF ties break toward the lower original index") {
  const std::vector<std::vector<double>> mus{{1.0}, {1.0}, {0.0}};
  const auto tau = gsf_order(mus);
  CHECK(tau == std::vector<std::size_t>{2, 0, 1});
}

TEST_CASE("random 1-D GSF always sorts ascending") {
  Rng rng(4);
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t n = 1 + rng.uniform_index(7);
    std::vector<std::vector<double>> mus(n);
    for (auto& m : mus) m = {rng.uniform(0.0, 10.0)};
    const auto tau = gsf_order(mus);
    for (std::size_t k = 1; k < n; ++k) CHECK(mus[tau[k]][0] >= mus[tau[k - 1]][0]);
  }
}

namespace {

ParameterVector three_state_params(const std::vector<double>& means) {
  ParameterVector p;
  const std::size_t n = means.size();
  Matrix g(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) g(i, j) = (i == j) ? 0.8 : 0.2 / (n - 1);
  p.transition = Homogeneous{g};
  p.delta = stationary_distribution(g);
  p.delta_mode = DeltaMode::Stationary;
  p.emissions.states.resize(n);
  for (std::size_t j = 0; j < n; ++j) p.emissions.states[j] = {GammaParams{means[j], 2.0}};
  return p;
}

}  // namespace

TEST_CASE("count_distinct_states merges exact ties for any tolerance") {
  const auto g = count_distinct_states(three_state_params({1.0, 1.0, 5.0}), 1e-6);
  CHECK(g.n_hat == 2);
  REQUIRE(g.groups.size() == 2);
  CHECK(g.groups[0] == std::vector<std::size_t>{0, 1});
  CHECK(g.groups[1] == std::vector<std::size_t>{2});
}

TEST_CASE("well-separated means stay distinct at the default tolerance") {
  const auto g = count_distinct_states(three_state_params({1.0, 3.0, 5.5}), 1e-3);
  CHECK(g.n_hat == 3);
}

TEST_CASE("a gap below the relative threshold merges") {
  // threshold = merge_tol * (max - min) = 1e-3 * 5 = 5e-3; eps = 1e-4 merges
  const auto g = count_distinct_states(three_state_params({2.0, 2.0 + 1e-4, 7.0}), 1e-3);
  CHECK(g.n_hat == 2);
  // and a gap above it stays distinct
  const auto g2 = count_distinct_states(three_state_params({2.0, 2.1, 7.0}), 1e-3);
  CHECK(g2.n_hat == 3);
}

TEST_CASE("merging a uniform 4x4 tpm gives a uniform 2x2 tpm") {
  ParameterVector p;
  Matrix g(4, 4, 0.25);
  p.transition = Homogeneous{g};
  p.delta = {0.25, 0.25, 0.25, 0.25};
  p.delta_mode = DeltaMode::Stationary;
  p.emissions.states.assign(4, {GammaParams{1.0, 1.0}});
  p.emissions.states[2] = {GammaParams{5.0, 1.0}};
  p.emissions.states[3] = {GammaParams{5.0, 1.0}};
  StateGrouping grouping;
  grouping.groups = {{0, 1}, {2, 3}};
  grouping.n_hat = 2;
  const ParameterVector merged = merge_model(p, grouping, {1.0, 1.0, 1.0, 1.0});
  const Matrix& mg = std::get<Homogeneous>(merged.transition).gamma;
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 2; ++j) CHECK(mg(i, j) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("merged tpm reproduces the worked averaging pattern") {
  // rows 1-2 as in the worked example; gamma~11 = (0.7+0.1+0.1+0.7)/2 = 0.8
  ParameterVector p;
  p.transition = Homogeneous{make_tpm({{0.7, 0.1, 0.1, 0.1},
                                       {0.1, 0.7, 0.1, 0.1},
                                       {0.1, 0.1, 0.7, 0.1},
                                       {0.1, 0.1, 0.1, 0.7}})};
  p.delta = {0.25, 0.25, 0.25, 0.25};
  p.delta_mode = DeltaMode::Free;
  p.emissions.states.assign(4, {GammaParams{1.0, 1.0}});
  StateGrouping grouping;
  grouping.groups = {{0, 1}, {2, 3}};
  grouping.n_hat = 2;
  const ParameterVector merged = merge_model(p, grouping, {});
  const Matrix& mg = std::get<Homogeneous>(merged.transition).gamma;
  CHECK(mg(0, 0) == doctest::Approx(0.8).epsilon(1e-12));
  CHECK(mg(0, 1) == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(mg(1, 0) == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(mg(1, 1) == doctest::Approx(0.8).epsilon(1e-12));
}

TEST_CASE("identity grouping returns the model unchanged") {
  ParameterVector p = three_state_params({1.0, 3.0, 5.5});
  StateGrouping grouping;
  grouping.groups = {{0}, {1}, {2}};
  grouping.n_hat = 3;
  const ParameterVector merged = merge_model(p, grouping, {1.0, 1.0, 1.0});
  CHECK(std::get<Homogeneous>(merged.transition).gamma ==
        std::get<Homogeneous>(p.transition).gamma);
  CHECK(merged.delta == p.delta);
}

TEST_CASE("merged rows sum to one and merging ignores group listing order") {
  Rng rng(99);
  for (int rep = 0; rep < 50; ++rep) {
    const std::size_t n = 4;
    Matrix g(n, n);
    for (std::size_t i = 0; i < n; ++i) {
      double row = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        g(i, j) = 0.05 + rng.uniform();
        row += g(i, j);
      }
      for (std::size_t j = 0; j < n; ++j) g(i, j) /= row;
    }
    ParameterVector p;
    p.transition = Homogeneous{g};
    p.delta = {0.25, 0.25, 0.25, 0.25};
    p.delta_mode = DeltaMode::Free;
    p.emissions.states.assign(4, {GammaParams{1.0, 1.0}});
    p.emissions.states[3] = {GammaParams{6.0, 1.0}};

    StateGrouping g1, g2;
    g1.groups = {{0, 1, 2}, {3}};
    g1.n_hat = 2;
    g2.groups = {{3}, {0, 1, 2}};  // same partition, listed differently
    g2.n_hat = 2;
    const auto m1 = merge_model(p, g1, {});
    const auto m2 = merge_model(p, g2, {});
    const Matrix& a = std::get<Homogeneous>(m1.transition).gamma;
    const Matrix& b = std::get<Homogeneous>(m2.transition).gamma;
    for (std::size_t i = 0; i < 2; ++i) {
      double row = 0.0;
      for (std::size_t j = 0; j < 2; ++j) {
        row += a(i, j);
        CHECK(a(i, j) == doctest::Approx(b(1 - i, 1 - j)).epsilon(1e-12));
      }
      CHECK(std::fabs(row - 1.0) < 1e-12);
    }
  }
}

TEST_CASE("merged emissions are weight-averaged within groups") {
  ParameterVector p = three_state_params({1.0, 2.0, 9.0});
  StateGrouping grouping;
  grouping.groups = {{0, 1}, {2}};
  grouping.n_hat = 2;
  const auto merged = merge_model(p, grouping, {3.0, 1.0, 1.0});
  const auto& g0 = std::get<GammaParams>(merged.emissions.states[0][0]);
  CHECK(g0.mean == doctest::Approx((3.0 * 1.0 + 1.0 * 2.0) / 4.0));
}

TEST_CASE("empty groups are rejected") {
  ParameterVector p = three_state_params({1.0, 2.0, 3.0});
  StateGrouping grouping;
  grouping.groups = {{0, 1, 2}, {}};
  grouping.n_hat = 2;
  CHECK_THROWS_AS(merge_model(p, grouping, {}), error);
}

TEST_CASE("multivariate vectors are standardized before ordering") {
  // second coordinate has a much larger scale; without standardization the
  // chain would be driven by it alone
  EmissionParams em;
  em.states = {
      {GammaParams{1.0, 2.0}, VonMisesParams{0.0, 100.0}},
      {GammaParams{2.0, 2.0}, VonMisesParams{0.0, 900.0}},
      {GammaParams{3.0, 2.0}, VonMisesParams{0.0, 500.0}},
  };
  const auto vecs = gsf_vectors(em);
  REQUIRE(vecs.size() == 3);
  REQUIRE(vecs[0].size() == 2);
  // both coordinates now have unit cross-state sd
  for (std::size_t d = 0; d < 2; ++d) {
    double mean = 0.0;
    for (const auto& v : vecs) mean += v[d];
    mean /= 3.0;
    double var = 0.0;
    for (const auto& v : vecs) var += (v[d] - mean) * (v[d] - mean);
    CHECK(std::sqrt(var / 2.0) == doctest::Approx(1.0).epsilon(1e-12));
  }
}
