#ifndef DPMLE_TRANSITIONS_HPP
#define DPMLE_TRANSITIONS_HPP

#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "dpmle/matrix.hpp"

namespace dpmle {

// Time-homogeneous transition model: an explicit row-stochastic tpm.
struct Homogeneous {
  Matrix gamma;  // N x N

  std::size_t order() const { return gamma.rows(); }
};

// Multinomial-logit transition model with time-varying covariates.
// For i != j: c_ij(t) = beta_0^ij + sum_c beta_c^ij * w_c(t); c_ii = 0;
// rows are produced by a row-wise softmax.
struct CovariateLogit {
  std::size_t n_states = 0;
  std::size_t n_cov = 0;
  // coefficients for off-diagonal cells, (C+1) per cell, cells in row-major
  // order skipping the diagonal
  std::vector<double> beta;

  std::size_t order() const { return n_states; }
  std::size_t n_cells() const { return n_states * (n_states - 1); }
  std::size_t n_coef() const { return n_cells() * (n_cov + 1); }

  // index of the coefficient block for cell (i, j), i != j
  std::size_t cell_index(std::size_t i, std::size_t j) const {
    return i * (n_states - 1) + (j < i ? j : j - 1);
  }
  double* cell(std::size_t i, std::size_t j) {
    return beta.data() + cell_index(i, j) * (n_cov + 1);
  }
  const double* cell(std::size_t i, std::size_t j) const {
    return beta.data() + cell_index(i, j) * (n_cov + 1);
  }

  static CovariateLogit zeros(std::size_t n_states, std::size_t n_cov) {
    CovariateLogit m;
    m.n_states = n_states;
    m.n_cov = n_cov;
    m.beta.assign(m.n_coef(), 0.0);
    return m;
  }
};

// A covariate-logit model whose states have been merged into groups; the
// group-level tpm at time t averages the full tpm rows (see merge_model).
struct MergedLogit {
  CovariateLogit base;
  std::vector<std::vector<std::size_t>> groups;  // partition of base states

  std::size_t order() const { return groups.size(); }
};

using TransitionModel = std::variant<Homogeneous, CovariateLogit, MergedLogit>;

std::size_t transition_order(const TransitionModel& m);
bool is_time_varying(const TransitionModel& m);

// The tpm in effect for a transition at a given time. Homogeneous models
// ignore the covariate row; CovariateLogit requires one of length C.
Matrix transition_matrix_at(const TransitionModel& model,
                            std::optional<std::span<const double>> covariates_row = std::nullopt);

// pi = 1 (I_N - Gamma + U)^{-1}, U the matrix of ones; requires an
// irreducible chain.
std::vector<double> stationary_distribution(const Matrix& gamma);

}  // namespace dpmle

#endif
