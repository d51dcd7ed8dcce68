#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "dpmle/detail/fit_context.hpp"
#include "dpmle/detail/optimize.hpp"
#include "dpmle/errors.hpp"
#include "dpmle/penalized_em.hpp"
#include "dpmle/special_functions.hpp"

namespace dpmle {

namespace {

// --- logit parameterization of a single tpm (diagonal reference 0) ---

std::size_t cell_idx(std::size_t n, std::size_t i, std::size_t j) {
  return i * (n - 1) + (j < i ? j : j - 1);
}

Matrix tpm_from_logits(const std::vector<double>& x, std::size_t n) {
  Matrix g(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    double mx = 0.0;
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) mx = std::max(mx, x[cell_idx(n, i, j)]);
    double sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double c = (j == i) ? 0.0 : x[cell_idx(n, i, j)];
      g(i, j) = std::exp(c - mx);
      sum += g(i, j);
    }
    for (std::size_t j = 0; j < n; ++j) g(i, j) /= sum;
  }
  return g;
}

std::vector<double> logits_from_tpm(const Matrix& g) {
  const std::size_t n = g.rows();
  std::vector<double> x(n * (n - 1));
  for (std::size_t i = 0; i < n; ++i) {
    const double d = std::max(g(i, i), 1e-12);
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) x[cell_idx(n, i, j)] = std::log(std::max(g(i, j), 1e-12) / d);
  }
  return x;
}

// inverse of (I - Gamma + U); also returns pi = 1 * inv
Matrix fundamental_inverse(const Matrix& gamma, std::vector<double>& pi) {
  const std::size_t n = gamma.rows();
  Matrix a(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      a(i, j) = (i == j ? 1.0 : 0.0) - gamma(i, j) + 1.0;
  // columns of W solve A w = e_k, i.e. W = A^{-1}
  Matrix w(n, n);
  for (std::size_t k = 0; k < n; ++k) {
    std::vector<double> e(n, 0.0);
    e[k] = 1.0;
    // solve A^T? No: we need W with pi = 1 W, W = A^{-1}; solve A x = e_k gives column k
    const std::vector<double> col = solve_linear(a, e);
    for (std::size_t i = 0; i < n; ++i) w(i, k) = col[i];
  }
  pi.assign(n, 0.0);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = 0; i < n; ++i) pi[j] += w(i, j);
  return w;
}

}  // namespace

TransitionUpdate m_step_transition_stationary(const EStepStats& stats, double c_n,
                                              const Matrix& current, const InnerOptions& opts) {
  const std::size_t n = current.rows();
  if (stats.order() != n)
    throw dimension_error("m_step_transition_stationary: state count mismatch");
  const std::vector<double> u1 = stats.initial_weights();
  const Matrix v = stats.transition_counts();
  // gradients scale with the transition counts; make the stop rule relative
  double total_v = 0.0;
  for (double x : v.data()) total_v += x;
  const double grad_tol = opts.grad_tol * (1.0 + total_v);

  auto objective = [&](const std::vector<double>& x, std::vector<double>* grad) {
    const Matrix g = tpm_from_logits(x, n);
    std::vector<double> pi;
    const Matrix w = fundamental_inverse(g, pi);
    double val = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (!(pi[j] > 0.0)) return -std::numeric_limits<double>::infinity();
      val += (u1[j] + c_n) * std::log(pi[j]);
    }
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) val += v(i, j) * std::log(g(i, j));
    if (grad) {
      // d/dgamma_ab of the pi part: pi_a * (W r)_b, r_j = (u1_j + c_n)/pi_j
      std::vector<double> r(n), wr(n, 0.0);
      for (std::size_t j = 0; j < n; ++j) r[j] = (u1[j] + c_n) / pi[j];
      for (std::size_t b = 0; b < n; ++b)
        for (std::size_t j = 0; j < n; ++j) wr[b] += w(b, j) * r[j];
      Matrix dg(n, n);
      for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = 0; b < n; ++b)
          dg(a, b) = v(a, b) / g(a, b) + pi[a] * wr[b];
      grad->assign(x.size(), 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        double dot = 0.0;
        for (std::size_t j = 0; j < n; ++j) dot += g(i, j) * dg(i, j);
        for (std::size_t j = 0; j < n; ++j)
          if (j != i) (*grad)[cell_idx(n, i, j)] = g(i, j) * (dg(i, j) - dot);
      }
    }
    return val;
  };

  // Warm candidates: the current tpm (monotonicity anchor) and the classical
  // count-ratio update, whichever scores higher.
  std::vector<double> x0 = logits_from_tpm(current);
  Matrix ratio(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    double rowsum = 0.0;
    for (std::size_t j = 0; j < n; ++j) rowsum += v(i, j);
    for (std::size_t j = 0; j < n; ++j)
      ratio(i, j) = (rowsum > 0.0) ? std::max(v(i, j), 1e-10) / rowsum : 1.0 / n;
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += ratio(i, j);
    for (std::size_t j = 0; j < n; ++j) ratio(i, j) /= s;
  }
  const std::vector<double> x1 = logits_from_tpm(ratio);
  if (objective(x1, nullptr) > objective(x0, nullptr)) x0 = x1;

  const auto res = detail::gradient_ascent(x0, objective, opts.max_iterations, grad_tol,
                                           1.0 / (1.0 + total_v));
  if (!std::isfinite(res.value))
    throw convergence_error("m_step_transition_stationary: objective not finite", res.value);

  TransitionUpdate upd;
  upd.gamma = tpm_from_logits(res.x, n);
  upd.pi = stationary_distribution(upd.gamma);
  upd.objective = res.value;
  upd.iterations = res.iterations;
  return upd;
}

namespace {

// per-distinct-covariate-row transition weights pooled over series
struct PooledLogitData {
  std::vector<std::vector<double>> rows;  // distinct covariate rows
  std::vector<Matrix> v;                  // matching summed v_jk
};

PooledLogitData pool_transition_weights(const ObservationSet& obs, const EStepStats& stats,
                                        const std::vector<detail::CovKeys>& keys,
                                        std::size_t n) {
  PooledLogitData out;
  std::map<std::vector<double>, std::size_t> index;
  for (std::size_t m = 0; m < obs.series.size(); ++m) {
    const auto& k = keys[m];
    const auto& st = stats.series[m];
    std::vector<std::size_t> remap(k.rows.size());
    for (std::size_t r = 0; r < k.rows.size(); ++r) {
      auto [it, inserted] = index.emplace(k.rows[r], out.rows.size());
      if (inserted) {
        out.rows.push_back(k.rows[r]);
        out.v.emplace_back(n, n);
      }
      remap[r] = it->second;
    }
    for (std::size_t t = 1; t < st.T; ++t) {
      Matrix& vk = out.v[remap[k.key[t]]];
      const double* vt = &st.v[(t - 1) * n * n];
      for (std::size_t i = 0; i < n * n; ++i) vk.data()[i] += vt[i];
    }
  }
  return out;
}

CovariateLogit beta_from_vector(const CovariateLogit& shape, const std::vector<double>& x) {
  CovariateLogit b = shape;
  b.beta = x;
  return b;
}

}  // namespace

namespace detail {

CovariateLogit m_step_transition_nonstationary_ctx(FitContext& ctx, const EStepStats& stats,
                                                   double c_n, const ParameterVector& current,
                                                   const InnerOptions& opts) {
  const auto& model = std::get<CovariateLogit>(current.transition);
  const std::size_t n = model.n_states;
  const std::size_t ncov = model.n_cov;
  const PooledLogitData pooled = pool_transition_weights(*ctx.obs, stats, ctx.keys, n);
  double total_v = 0.0;
  for (const Matrix& vk : pooled.v)
    for (double x : vk.data()) total_v += x;
  const double grad_tol = opts.grad_tol * (1.0 + total_v);

  auto data_term = [&](const std::vector<double>& x, std::vector<double>* grad) {
    const CovariateLogit b = beta_from_vector(model, x);
    if (grad) grad->assign(x.size(), 0.0);
    double val = 0.0;
    for (std::size_t r = 0; r < pooled.rows.size(); ++r) {
      const Matrix g = transition_matrix_at(b, std::span<const double>(pooled.rows[r]));
      const Matrix& vk = pooled.v[r];
      for (std::size_t i = 0; i < n; ++i) {
        double vrow = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
          val += vk(i, j) * std::log(g(i, j));
          vrow += vk(i, j);
        }
        if (grad) {
          for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            const double dc = vk(i, j) - g(i, j) * vrow;
            double* gb = grad->data() + cell_idx(n, i, j) * (ncov + 1);
            gb[0] += dc;
            for (std::size_t c = 0; c < ncov; ++c) gb[c + 1] += dc * pooled.rows[r][c];
          }
        }
      }
    }
    return val;
  };

  auto occupancy_term = [&](const std::vector<double>& x) {
    const CovariateLogit b = beta_from_vector(model, x);
    const std::vector<double> pi = ctx.occupancy(current.delta, TransitionModel(b));
    double val = 0.0;
    for (double p : pi) val += std::log(std::max(p, 1e-300));
    return c_n * val;
  };

  // The occupancy term needs a forward-backward pass per evaluation, so its
  // gradient is linearized once per M-step (forward differences at the entry
  // point); the inner ascent then runs on the cheap analytic surrogate. The
  // final point is accepted only if the true objective improved, halving back
  // toward the entry otherwise.
  const std::vector<double>& x0 = model.beta;
  const double occ0 = (c_n > 0.0) ? occupancy_term(x0) : 0.0;
  std::vector<double> occ_grad(x0.size(), 0.0);
  if (c_n > 0.0) {
    std::vector<double> xt = x0;
    for (std::size_t p = 0; p < x0.size(); ++p) {
      const double h = 1e-5 * std::max(1.0, std::fabs(x0[p]));
      xt[p] = x0[p] + h;
      occ_grad[p] = (occupancy_term(xt) - occ0) / h;
      xt[p] = x0[p];
    }
  }

  auto surrogate = [&](const std::vector<double>& x, std::vector<double>* grad) {
    double val = data_term(x, grad);
    for (std::size_t p = 0; p < x.size(); ++p) {
      val += occ_grad[p] * (x[p] - x0[p]);
      if (grad) (*grad)[p] += occ_grad[p];
    }
    return val;
  };

  // The data term is concave in beta with an analytic Hessian (log-softmax of
  // linear logits); damped Newton converges in a handful of iterations where
  // plain gradient ascent zigzags.
  auto hessian = [&](const std::vector<double>& x, Matrix& h) {
    const std::size_t d = x.size();
    h = Matrix(d, d);
    const CovariateLogit b = beta_from_vector(model, x);
    for (std::size_t r = 0; r < pooled.rows.size(); ++r) {
      const Matrix g = transition_matrix_at(b, std::span<const double>(pooled.rows[r]));
      const Matrix& vk = pooled.v[r];
      const auto& w = pooled.rows[r];
      for (std::size_t i = 0; i < n; ++i) {
        double vrow = 0.0;
        for (std::size_t j = 0; j < n; ++j) vrow += vk(i, j);
        for (std::size_t j = 0; j < n; ++j) {
          if (j == i) continue;
          for (std::size_t l = 0; l < n; ++l) {
            if (l == i) continue;
            // d2/dc_ij dc_il = -vrow * gamma_ij (delta_jl - gamma_il)
            const double hc = -vrow * g(i, j) * ((j == l ? 1.0 : 0.0) - g(i, l));
            const std::size_t pj = cell_idx(n, i, j) * (ncov + 1);
            const std::size_t pl = cell_idx(n, i, l) * (ncov + 1);
            for (std::size_t a = 0; a <= ncov; ++a) {
              const double wa = (a == 0) ? 1.0 : w[a - 1];
              for (std::size_t bb = 0; bb <= ncov; ++bb) {
                const double wb = (bb == 0) ? 1.0 : w[bb - 1];
                h(pj + a, pl + bb) += hc * wa * wb;
              }
            }
          }
        }
      }
    }
  };

  std::vector<double> x = x0;
  std::vector<double> grad(x.size());
  double value = surrogate(x, &grad);
  Matrix h;
  int newton_iters = std::min(opts.max_iterations, 60);
  for (int it = 0; it < newton_iters; ++it) {
    double gmax = 0.0;
    for (double g : grad) gmax = std::max(gmax, std::fabs(g));
    if (gmax < grad_tol) break;
    hessian(x, h);
    // solve (-H + ridge I) dir = grad
    const std::size_t d = x.size();
    Matrix a(d, d);
    double tr = 0.0;
    for (std::size_t i = 0; i < d; ++i) tr += -h(i, i);
    const double ridge = 1e-10 * (1.0 + tr);
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) a(i, j) = -h(i, j) + (i == j ? ridge : 0.0);
    std::vector<double> dir;
    try {
      dir = solve_linear(a, grad);
    } catch (const singularity_error&) {
      break;  // fall through to gradient ascent polish
    }
    // backtracking on the Newton direction
    bool accepted = false;
    double s = 1.0;
    std::vector<double> trial(d);
    for (int bt = 0; bt < 40; ++bt) {
      for (std::size_t i = 0; i < d; ++i) trial[i] = x[i] + s * dir[i];
      const double cand = surrogate(trial, nullptr);
      if (std::isfinite(cand) && cand > value) {
        x.swap(trial);
        value = surrogate(x, &grad);
        accepted = true;
        break;
      }
      s *= 0.5;
    }
    if (!accepted) break;
  }
  const auto res = detail::gradient_ascent(x, surrogate, 30, grad_tol, 1.0 / (1.0 + total_v));
  if (!std::isfinite(res.value))
    throw convergence_error("m_step_transition_nonstationary: objective not finite", res.value);
  if (c_n <= 0.0) return beta_from_vector(model, res.x);

  auto true_objective = [&](const std::vector<double>& xx) {
    return data_term(xx, nullptr) + occupancy_term(xx);
  };
  const double base = data_term(x0, nullptr) + occ0;
  std::vector<double> xf = res.x;
  for (int bt = 0; bt < 12; ++bt) {
    if (true_objective(xf) >= base) return beta_from_vector(model, xf);
    for (std::size_t p = 0; p < xf.size(); ++p) xf[p] = x0[p] + 0.5 * (xf[p] - x0[p]);
  }
  return beta_from_vector(model, x0);  // keep the entry point: never descend
}

}  // namespace detail

CovariateLogit m_step_transition_nonstationary(const ObservationSet& obs, const EStepStats& stats,
                                               double c_n, const ParameterVector& current,
                                               const InnerOptions& opts) {
  if (!std::holds_alternative<CovariateLogit>(current.transition))
    throw dimension_error("m_step_transition_nonstationary: model must be covariate-logit");
  detail::FitContext ctx;
  ctx.prepare(obs, current.order());
  ctx.update_emissions(current.emissions);
  return detail::m_step_transition_nonstationary_ctx(ctx, stats, c_n, current, opts);
}

// ---------------------------------------------------------------------------
// Emission updates
// ---------------------------------------------------------------------------

namespace {

struct ChannelSuff {
  double U = 0.0;   // sum of weights over unmasked t
  double W = 0.0;   // sum w*y
  double Q = 0.0;   // sum w*y^2
  double L = 0.0;   // sum w*log(y) (gamma)
  double C = 0.0;   // sum w*cos(y) (von Mises)
  double S = 0.0;   // sum w*sin(y)
};

std::vector<std::vector<ChannelSuff>> emission_suffstats(const ObservationSet& obs,
                                                         const EStepStats& stats) {
  const std::size_t n = stats.order();
  const std::size_t nch = obs.n_channels();
  std::vector<std::vector<ChannelSuff>> suff(n, std::vector<ChannelSuff>(nch));
  for (std::size_t m = 0; m < obs.series.size(); ++m) {
    const Series& s = obs.series[m];
    const auto& st = stats.series[m];
    for (std::size_t c = 0; c < nch; ++c) {
      const auto& vals = s.values[c];
      const auto& miss = s.missing[c];
      for (std::size_t t = 0; t < st.T; ++t) {
        if (miss[t]) continue;
        const double y = vals[t];
        for (std::size_t j = 0; j < n; ++j) {
          const double w = st.u_at(t, j);
          ChannelSuff& cs = suff[j][c];
          cs.U += w;
          cs.W += w * y;
          cs.Q += w * y * y;
          cs.L += w * std::log(std::max(y, 1e-10));
          cs.C += w * std::cos(y);
          cs.S += w * std::sin(y);
        }
      }
    }
  }
  return suff;
}

// Weighted gamma shape MLE: solves log s - digamma(s) = delta by Newton in
// log s with a bisection fallback.
double solve_gamma_shape(double delta, double init) {
  delta = std::max(delta, 1e-10);
  double s = (init > 0.0 && std::isfinite(init))
                 ? init
                 : (3.0 - delta + std::sqrt((delta - 3.0) * (delta - 3.0) + 24.0 * delta)) /
                       (12.0 * delta);
  s = std::clamp(s, 1e-3, 1e6);
  double x = std::log(s);
  for (int it = 0; it < 60; ++it) {
    const double sv = std::exp(x);
    const double f = std::log(sv) - digamma(sv) - delta;
    const double fp = 1.0 - sv * trigamma(sv);  // d/dx
    if (std::fabs(fp) < 1e-14) break;
    double xn = x - f / fp;
    xn = std::clamp(xn, x - 2.0, x + 2.0);
    if (std::fabs(xn - x) < 1e-12) { x = xn; break; }
    x = xn;
  }
  // upper bound keeps a state from collapsing onto single observations
  // (unbounded mixture likelihood); cv stays >= 10%
  return std::clamp(std::exp(x), 1e-3, 100.0);
}

// Von Mises concentration from the mean resultant length.
double solve_vm_kappa(double rbar) {
  rbar = std::clamp(rbar, 0.0, 1.0 - 1e-10);
  if (rbar < 1e-8) return 0.0;
  // Banerjee et al. starting value, then Newton on A1(kappa) = rbar
  double k = rbar * (2.0 - rbar * rbar) / (1.0 - rbar * rbar);
  for (int it = 0; it < 30; ++it) {
    const double a1 = bessel_i1_over_i0(k);
    const double da = 1.0 - a1 * a1 - a1 / k;
    if (da <= 0.0) break;
    const double kn = k - (a1 - rbar) / da;
    if (!(kn > 0.0)) { k *= 0.5; continue; }
    if (std::fabs(kn - k) < 1e-12 * (1.0 + k)) { k = kn; break; }
    k = kn;
  }
  // a near-unit resultant from a handful of points would send kappa to
  // infinity; cap at a practically identifiable concentration
  return std::clamp(k, 0.0, 100.0);
}

// Unpenalized family updates at the current means (Eq-16 staging: spread
// parameters first, means afterwards).
void update_unpenalized(std::vector<std::vector<ChannelParams>>& states,
                        const std::vector<std::vector<ChannelSuff>>& suff) {
  for (std::size_t j = 0; j < states.size(); ++j) {
    for (std::size_t c = 0; c < states[j].size(); ++c) {
      const ChannelSuff& cs = suff[j][c];
      if (cs.U < 1e-12) continue;  // effectively empty state: keep parameters
      ChannelParams& p = states[j][c];
      if (std::holds_alternative<GammaParams>(p)) {
        auto& g = std::get<GammaParams>(p);
        const double delta =
            std::log(g.mean) + cs.W / (cs.U * g.mean) - cs.L / cs.U - 1.0;
        g.shape = solve_gamma_shape(delta, g.shape);
      } else if (std::holds_alternative<NormalParams>(p)) {
        auto& nrm = std::get<NormalParams>(p);
        const double var =
            (cs.Q - 2.0 * nrm.mean * cs.W + nrm.mean * nrm.mean * cs.U) / cs.U;
        nrm.sd = std::sqrt(std::max(var, 1e-12));
      } else {
        auto& vm = std::get<VonMisesParams>(p);
        vm.mean = std::atan2(cs.S, cs.C);
        if (vm.mean <= -M_PI) vm.mean = M_PI;
        const double rbar = std::sqrt(cs.C * cs.C + cs.S * cs.S) / cs.U;
        vm.kappa = solve_vm_kappa(rbar);
      }
    }
  }
}

bool is_mean_channel(const ChannelParams& p) {
  return !std::holds_alternative<VonMisesParams>(p);
}

// weighted log-likelihood terms in the mean, per family, from suffstats
double mean_loglik(const ChannelParams& p, const ChannelSuff& cs, double mu) {
  if (std::holds_alternative<GammaParams>(p)) {
    const double s = std::get<GammaParams>(p).shape;
    return -s * (cs.U * std::log(mu) + cs.W / mu);
  }
  const double sd = std::get<NormalParams>(p).sd;
  return -(cs.Q - 2.0 * mu * cs.W + mu * mu * cs.U) / (2.0 * sd * sd);
}

double mean_loglik_grad(const ChannelParams& p, const ChannelSuff& cs, double mu) {
  if (std::holds_alternative<GammaParams>(p)) {
    const double s = std::get<GammaParams>(p).shape;
    return s * (cs.W / (mu * mu) - cs.U / mu);
  }
  const double sd = std::get<NormalParams>(p).sd;
  return (cs.W - mu * cs.U) / (sd * sd);
}

// Scalar penalized mean update: base + squared-gap parameterization keeps the
// means ordered; the gamma base runs through exp to stay positive.
void update_means_scalar(std::vector<std::vector<ChannelParams>>& states,
                         const std::vector<std::vector<ChannelSuff>>& suff,
                         std::size_t channel, const std::vector<std::size_t>& tau,
                         const std::vector<double>& lla_slope, const InnerOptions& opts,
                         double grad_tol) {
  const std::size_t n = states.size();
  const bool positive = std::holds_alternative<GammaParams>(states[0][channel]);

  auto mean_of = [&](const ChannelParams& p) {
    return std::holds_alternative<GammaParams>(p) ? std::get<GammaParams>(p).mean
                                                  : std::get<NormalParams>(p).mean;
  };

  // x = (b0, g_1..g_{n-1}); mu_tau(0) = base(b0), mu_tau(k) = mu_tau(k-1)+g_k^2
  auto unpack = [&](const std::vector<double>& x, std::vector<double>& mu) {
    double m = positive ? std::exp(x[0]) : x[0];
    mu[tau[0]] = m;
    for (std::size_t k = 1; k < n; ++k) {
      m += x[k] * x[k];
      mu[tau[k]] = m;
    }
  };

  std::vector<double> mu(n);
  auto objective = [&](const std::vector<double>& x, std::vector<double>* grad) {
    unpack(x, mu);
    double val = 0.0;
    for (std::size_t j = 0; j < n; ++j) val += mean_loglik(states[j][channel], suff[j][channel], mu[j]);
    for (std::size_t k = 1; k < n; ++k) val -= lla_slope[k - 1] * x[k] * x[k];
    if (grad) {
      grad->assign(x.size(), 0.0);
      std::vector<double> d(n);
      for (std::size_t j = 0; j < n; ++j)
        d[j] = mean_loglik_grad(states[j][channel], suff[j][channel], mu[j]);
      // suffix sums along the chain: moving gap k moves all means above it
      double suffix = 0.0;
      for (std::size_t k = n; k-- > 1;) {
        suffix += d[tau[k]];
        (*grad)[k] = 2.0 * x[k] * (suffix - lla_slope[k - 1]);
      }
      suffix += d[tau[0]];
      (*grad)[0] = suffix * (positive ? std::exp(x[0]) : 1.0);
    }
    return val;
  };

  std::vector<double> x(n, 0.0);
  {
    const double base = mean_of(states[tau[0]][channel]);
    x[0] = positive ? std::log(std::max(base, 1e-8)) : base;
    for (std::size_t k = 1; k < n; ++k) {
      const double gap = mean_of(states[tau[k]][channel]) - mean_of(states[tau[k - 1]][channel]);
      x[k] = std::sqrt(std::max(gap, 0.0));
    }
  }

  double weight_scale = 0.0;
  for (std::size_t j = 0; j < n; ++j) weight_scale += suff[j][channel].U;
  auto run = [&](std::vector<double> x0) {
    return detail::gradient_ascent(std::move(x0), objective, opts.max_iterations, grad_tol,
                                   1.0 / (1.0 + weight_scale));
  };
  auto res = run(x);

  // A gap parked at exactly zero is a saddle of the squared parameterization;
  // re-seed it when the one-sided derivative in eta is positive.
  {
    unpack(res.x, mu);
    std::vector<double> d(n);
    for (std::size_t j = 0; j < n; ++j)
      d[j] = mean_loglik_grad(states[j][channel], suff[j][channel], mu[j]);
    double scale = 0.0;
    for (std::size_t j = 0; j < n; ++j) scale = std::max(scale, std::fabs(mu[j]));
    bool reseeded = false;
    double suffix = 0.0;
    for (std::size_t k = n; k-- > 1;) {
      suffix += d[tau[k]];
      if (res.x[k] * res.x[k] < 1e-12 && suffix - lla_slope[k - 1] > 1e-8) {
        res.x[k] = std::sqrt(1e-6 * std::max(scale, 1.0));
        reseeded = true;
      }
    }
    if (reseeded) {
      auto res2 = run(res.x);
      if (res2.value >= res.value) res = std::move(res2);
    }
  }

  unpack(res.x, mu);
  for (std::size_t j = 0; j < n; ++j) {
    ChannelParams& p = states[j][channel];
    if (positive)
      std::get<GammaParams>(p).mean = std::max(mu[j], 1e-8);
    else
      std::get<NormalParams>(p).mean = mu[j];
  }
}

// Multivariate penalized update: gradient ascent on all gamma/normal means
// with the LLA gap penalty on the standardized GSF chain. Gamma means are
// optimized in log space. Standardization scales are frozen at entry.
void update_means_multivariate(std::vector<std::vector<ChannelParams>>& states,
                               const std::vector<std::vector<ChannelSuff>>& suff,
                               const std::vector<std::size_t>& tau,
                               const std::vector<double>& lla_slope,
                               const InnerOptions& opts, double grad_tol) {
  const std::size_t n = states.size();
  const std::size_t nch = states[0].size();
  // every channel contributes one GSF coordinate (mean or concentration)
  const std::size_t dim = nch;

  // standardization scales frozen at entry: cross-state sd per coordinate
  std::vector<double> raw_scale(dim, 1.0);
  std::vector<std::vector<double>> coord(n, std::vector<double>(dim));
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t c = 0; c < nch; ++c) coord[j][c] = penalized_coordinate(states[j][c]);
  for (std::size_t d = 0; d < dim; ++d) {
    double mean = 0.0;
    for (std::size_t j = 0; j < n; ++j) mean += coord[j][d];
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) var += (coord[j][d] - mean) * (coord[j][d] - mean);
    raw_scale[d] = (n > 1 && var > 0.0) ? std::sqrt(var / static_cast<double>(n - 1)) : 1.0;
  }

  // optimizable coordinates: (state, channel) for mean channels
  struct Slot { std::size_t state, channel, dim; bool log_space; };
  std::vector<Slot> slots;
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t c = 0; c < nch; ++c)
      if (is_mean_channel(states[j][c]))
        slots.push_back({j, c, c, std::holds_alternative<GammaParams>(states[j][c])});

  auto objective = [&](const std::vector<double>& x, std::vector<double>* grad) {
    // install candidate means into coord
    for (std::size_t s = 0; s < slots.size(); ++s) {
      const double mu = slots[s].log_space ? std::exp(x[s]) : x[s];
      coord[slots[s].state][slots[s].dim] = mu;
    }
    double val = 0.0;
    std::vector<double> dmu(slots.size(), 0.0);
    for (std::size_t s = 0; s < slots.size(); ++s) {
      const auto& sl = slots[s];
      const double mu = coord[sl.state][sl.dim];
      val += mean_loglik(states[sl.state][sl.channel], suff[sl.state][sl.channel], mu);
      if (grad) dmu[s] = mean_loglik_grad(states[sl.state][sl.channel], suff[sl.state][sl.channel], mu);
    }
    // gap penalty along the chain
    for (std::size_t k = 1; k < n; ++k) {
      const auto& za = coord[tau[k]];
      const auto& zb = coord[tau[k - 1]];
      double gap2 = 0.0;
      for (std::size_t d = 0; d < dim; ++d) {
        const double dz = (za[d] - zb[d]) / raw_scale[d];
        gap2 += dz * dz;
      }
      const double gap = std::sqrt(gap2);
      val -= lla_slope[k - 1] * gap;
      if (grad && gap > 1e-12) {
        for (std::size_t s = 0; s < slots.size(); ++s) {
          const auto& sl = slots[s];
          double sign = 0.0;
          if (sl.state == tau[k]) sign = 1.0;
          else if (sl.state == tau[k - 1]) sign = -1.0;
          if (sign == 0.0) continue;
          const double dz = (za[sl.dim] - zb[sl.dim]) / raw_scale[sl.dim];
          dmu[s] -= lla_slope[k - 1] * sign * dz / (gap * raw_scale[sl.dim]);
        }
      }
    }
    if (grad) {
      grad->resize(slots.size());
      for (std::size_t s = 0; s < slots.size(); ++s)
        (*grad)[s] = dmu[s] * (slots[s].log_space ? std::exp(x[s]) : 1.0);
    }
    return val;
  };

  std::vector<double> x0(slots.size());
  for (std::size_t s = 0; s < slots.size(); ++s) {
    const double mu = coord[slots[s].state][slots[s].dim];
    x0[s] = slots[s].log_space ? std::log(std::max(mu, 1e-8)) : mu;
  }
  double weight_scale = 0.0;
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t c = 0; c < nch; ++c) weight_scale += suff[j][c].U;
  const auto res = detail::gradient_ascent(x0, objective, opts.max_iterations, grad_tol,
                                           1.0 / (1.0 + weight_scale));
  for (std::size_t s = 0; s < slots.size(); ++s) {
    const auto& sl = slots[s];
    const double mu = sl.log_space ? std::max(std::exp(res.x[s]), 1e-8) : res.x[s];
    if (sl.log_space)
      std::get<GammaParams>(states[sl.state][sl.channel]).mean = mu;
    else
      std::get<NormalParams>(states[sl.state][sl.channel]).mean = mu;
  }
}

}  // namespace

EmissionParams m_step_emission_penalized(const ObservationSet& obs, const EStepStats& stats,
                                         const PenaltyConfig& penalty,
                                         const ParameterVector& current,
                                         const std::vector<std::size_t>& tau,
                                         const InnerOptions& opts) {
  penalty.validate();
  const std::size_t n = current.order();
  if (stats.order() != n || tau.size() != n)
    throw dimension_error("m_step_emission_penalized: state count mismatch");
  const auto suff = emission_suffstats(obs, stats);

  EmissionParams out = current.emissions;
  update_unpenalized(out.states, suff);

  // identify mean channels; states with negligible weight keep their means
  std::vector<std::size_t> mean_channels;
  for (std::size_t c = 0; c < out.n_channels(); ++c)
    if (is_mean_channel(out.states[0][c])) mean_channels.push_back(c);
  if (mean_channels.empty()) return out;

  const double m_weight = static_cast<double>(obs.total_length());
  if (penalty.lambda <= 0.0) {
    // no penalty: plain weighted means
    for (std::size_t c : mean_channels) {
      for (std::size_t j = 0; j < n; ++j) {
        const ChannelSuff& cs = suff[j][c];
        if (cs.U < 1e-12) continue;
        ChannelParams& p = out.states[j][c];
        if (std::holds_alternative<GammaParams>(p))
          std::get<GammaParams>(p).mean = std::max(cs.W / cs.U, 1e-8);
        else
          std::get<NormalParams>(p).mean = cs.W / cs.U;
      }
    }
    return out;
  }

  // LLA slopes p'(eta_hat) at the entry gaps under tau
  const auto vecs = gsf_vectors(current.emissions);
  const auto gaps = gsf_gaps(vecs, tau);
  std::vector<double> slope(gaps.size());
  for (std::size_t k = 0; k < gaps.size(); ++k)
    slope[k] = scad_derivative(std::max(gaps[k], 0.0), penalty.lambda, m_weight, penalty.a);

  double total_u = 0.0;
  for (std::size_t j = 0; j < n; ++j) total_u += suff[j][mean_channels[0]].U;
  const double grad_tol = opts.grad_tol * (1.0 + total_u);
  if (vecs[0].size() == 1)
    update_means_scalar(out.states, suff, mean_channels[0], tau, slope, opts, grad_tol);
  else
    update_means_multivariate(out.states, suff, tau, slope, opts, grad_tol);
  return out;
}

}  // namespace dpmle
