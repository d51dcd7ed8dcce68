#include "dpmle/transitions.hpp"

#include <algorithm>
#include <cmath>

#include "dpmle/errors.hpp"

namespace dpmle {

std::size_t transition_order(const TransitionModel& m) {
  return std::visit([](const auto& t) { return t.order(); }, m);
}

bool is_time_varying(const TransitionModel& m) {
  return !std::holds_alternative<Homogeneous>(m);
}

namespace {

void softmax_row(const double* logits, std::size_t n, double* out) {
  double mx = logits[0];
  for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, logits[j]);
  double sum = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    out[j] = std::exp(logits[j] - mx);
    sum += out[j];
  }
  for (std::size_t j = 0; j < n; ++j) out[j] /= sum;
}

Matrix logit_tpm(const CovariateLogit& m, std::span<const double> w) {
  const std::size_t n = m.n_states;
  if (w.size() != m.n_cov)
    throw dimension_error("transition_matrix_at: covariate row has length " +
                          std::to_string(w.size()) + ", model expects " +
                          std::to_string(m.n_cov));
  for (double b : m.beta)
    if (!std::isfinite(b)) throw numeric_error("transition_matrix_at: non-finite coefficient");
  for (double x : w)
    if (!std::isfinite(x)) throw numeric_error("transition_matrix_at: non-finite covariate");

  Matrix out(n, n);
  std::vector<double> logits(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) {
        logits[j] = 0.0;
        continue;
      }
      const double* b = m.cell(i, j);
      double c = b[0];
      for (std::size_t k = 0; k < m.n_cov; ++k) c += b[k + 1] * w[k];
      logits[j] = c;
    }
    softmax_row(logits.data(), n, &out(i, 0));
  }
  return out;
}

Matrix merged_tpm(const MergedLogit& m, std::span<const double> w) {
  const Matrix full = logit_tpm(m.base, w);
  const std::size_t g = m.groups.size();
  Matrix out(g, g);
  for (std::size_t a = 0; a < g; ++a) {
    for (std::size_t b = 0; b < g; ++b) {
      double s = 0.0;
      for (std::size_t i : m.groups[a])
        for (std::size_t j : m.groups[b]) s += full(i, j);
      out(a, b) = s / static_cast<double>(m.groups[a].size());
    }
  }
  return out;
}

}  // namespace

Matrix transition_matrix_at(const TransitionModel& model,
                            std::optional<std::span<const double>> covariates_row) {
  if (std::holds_alternative<Homogeneous>(model)) {
    return std::get<Homogeneous>(model).gamma;
  }
  if (!covariates_row.has_value())
    throw dimension_error("transition_matrix_at: covariate model needs a covariate row");
  if (std::holds_alternative<CovariateLogit>(model))
    return logit_tpm(std::get<CovariateLogit>(model), *covariates_row);
  return merged_tpm(std::get<MergedLogit>(model), *covariates_row);
}

std::vector<double> stationary_distribution(const Matrix& gamma) {
  const std::size_t n = gamma.rows();
  if (gamma.cols() != n) throw dimension_error("stationary_distribution: tpm must be square");
  for (std::size_t i = 0; i < n; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (gamma(i, j) < -1e-12 || gamma(i, j) > 1.0 + 1e-12)
        throw numeric_error("stationary_distribution: entries must lie in [0, 1]");
      row += gamma(i, j);
    }
    if (std::fabs(row - 1.0) > 1e-9)
      throw numeric_error("stationary_distribution: rows must sum to 1");
  }
  // pi (I - Gamma + U) = 1  =>  solve the transposed system
  Matrix a(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      a(i, j) = (i == j ? 1.0 : 0.0) - gamma(j, i) + 1.0;
  std::vector<double> pi;
  try {
    pi = solve_linear(a, std::vector<double>(n, 1.0));
  } catch (const singularity_error&) {
    throw singularity_error("stationary_distribution: chain is not irreducible");
  }
  for (double p : pi)
    if (!(p > 0.0))
      throw singularity_error("stationary_distribution: non-positive solution (reducible chain)");
  return pi;
}

}  // namespace dpmle
