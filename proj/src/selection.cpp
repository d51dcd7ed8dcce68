#include "dpmle/selection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dpmle/errors.hpp"
#include "dpmle/rng.hpp"

namespace dpmle {

int num_params(int n_hat, int emission_dim, int covariate_count, bool nonstationary) {
  if (n_hat < 1) throw dimension_error("num_params: order must be >= 1");
  if (!nonstationary) return emission_dim * n_hat + n_hat * (n_hat - 1);
  return emission_dim * n_hat + n_hat * (n_hat - 1) * (covariate_count + 1) + (n_hat - 1);
}

double aic(double loglik, int k) { return -2.0 * loglik + 2.0 * k; }

double bic(double loglik, int k, double n) {
  return -2.0 * loglik + k * std::log(n);
}

double nic(double loglik, int k, double n) {
  return -2.0 * loglik + k * std::log(n);
}

namespace {

// pooled sorted values per channel, for quantile-based initialization
std::vector<std::vector<double>> channel_quantile_pools(const ObservationSet& obs) {
  std::vector<std::vector<double>> pools(obs.n_channels());
  for (const Series& s : obs.series)
    for (std::size_t c = 0; c < obs.n_channels(); ++c)
      for (std::size_t t = 0; t < s.length(); ++t)
        if (!s.is_missing(c, t)) pools[c].push_back(s.values[c][t]);
  for (auto& p : pools) std::sort(p.begin(), p.end());
  return pools;
}

double quantile_of(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) return 0.0;
  q = std::clamp(q, 0.0, 1.0);
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(pos);
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
}

}  // namespace

ParameterVector random_init(const ObservationSet& obs, const EmissionSpec& spec, int order,
                            bool nonstationary, Rng& rng) {
  const std::size_t n = static_cast<std::size_t>(order);
  const auto pools = channel_quantile_pools(obs);

  ParameterVector p;
  p.emissions.states.resize(n);
  for (std::size_t j = 0; j < n; ++j) p.emissions.states[j].resize(spec.families.size());

  for (std::size_t c = 0; c < spec.families.size(); ++c) {
    // stratified quantile placement plus jitter, sorted so states start ordered
    std::vector<double> qs(n);
    for (std::size_t j = 0; j < n; ++j) {
      const double base = (static_cast<double>(j) + 0.5) / static_cast<double>(n);
      qs[j] = std::clamp(base + rng.uniform(-0.3, 0.3) / static_cast<double>(n), 0.001, 0.999);
    }
    std::sort(qs.begin(), qs.end());
    for (std::size_t j = 0; j < n; ++j) {
      switch (spec.families[c]) {
        case Family::Gamma: {
          GammaParams g;
          g.mean = std::max(quantile_of(pools[c], qs[j]), 1e-3);
          g.shape = std::exp(rng.uniform(std::log(0.5), std::log(20.0)));
          p.emissions.states[j][c] = g;
          break;
        }
        case Family::Normal: {
          NormalParams nm;
          nm.mean = quantile_of(pools[c], qs[j]);
          const double spread = quantile_of(pools[c], 0.9) - quantile_of(pools[c], 0.1);
          nm.sd = std::max(spread / (2.0 * static_cast<double>(n)), 1e-3);
          p.emissions.states[j][c] = nm;
          break;
        }
        case Family::VonMises: {
          VonMisesParams vm;
          vm.mean = rng.uniform(-M_PI, M_PI);
          vm.kappa = std::exp(rng.uniform(std::log(0.5), std::log(20.0)));
          p.emissions.states[j][c] = vm;
          break;
        }
      }
    }
  }

  Matrix gamma(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    const double diag = (n == 1) ? 1.0 : rng.uniform(0.6, 0.95);
    for (std::size_t j = 0; j < n; ++j)
      gamma(i, j) = (i == j) ? diag : (1.0 - diag) / static_cast<double>(n - 1);
  }

  if (nonstationary) {
    const std::size_t ncov = obs.n_covariates();
    CovariateLogit logit = CovariateLogit::zeros(n, ncov);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (i != j) logit.cell(i, j)[0] = std::log(gamma(i, j) / gamma(i, i));
    p.transition = logit;
    p.delta.assign(n, 1.0 / static_cast<double>(n));
    p.delta_mode = DeltaMode::Free;
  } else {
    p.transition = Homogeneous{gamma};
    p.delta = stationary_distribution(gamma);
    p.delta_mode = DeltaMode::Stationary;
  }
  return p;
}

OrderSelectResult ic_order_select(const ObservationSet& obs, const std::vector<int>& orders,
                                  const EmissionSpec& spec, const OrderSelectOptions& opts,
                                  std::uint64_t seed) {
  if (orders.empty()) throw config_error("ic_order_select: order list is empty");
  obs.validate();
  const std::size_t n_obs = obs.total_length();

  OrderSelectResult out;
  out.aic_report.method = "AIC";
  out.bic_report.method = "BIC";

  for (std::size_t oi = 0; oi < orders.size(); ++oi) {
    const int order = orders[oi];
    EMFit best;
    bool have = false;
    std::string last_error;
    for (int r = 0; r < opts.restarts; ++r) {
      Rng rng = Rng::stream(seed, (static_cast<std::uint64_t>(oi) << 20) +
                                      static_cast<std::uint64_t>(r));
      try {
        const ParameterVector init = random_init(obs, spec, order, opts.nonstationary, rng);
        EMFit fit = fit_em(obs, init, opts.fit);
        if (!have || fit.loglik > best.loglik) {
          best = std::move(fit);
          have = true;
        }
      } catch (const error& e) {
        last_error = e.what();
      }
    }
    if (!have)
      throw convergence_error("ic_order_select: every restart failed at order " +
                                  std::to_string(order) + " (last: " + last_error + ")",
                              -std::numeric_limits<double>::infinity());

    const int k = num_params(order, spec.dim_theta1(), static_cast<int>(obs.n_covariates()),
                             opts.nonstationary);
    CandidateRecord rec;
    rec.order = order;
    rec.loglik = best.loglik;
    rec.k = k;
    rec.criterion = aic(best.loglik, k);
    out.aic_report.candidates.push_back(rec);
    rec.criterion = bic(best.loglik, k, static_cast<double>(n_obs));
    out.bic_report.candidates.push_back(rec);
    out.best_fits.push_back(std::move(best));
  }

  auto pick = [](CriterionReport& rep) {
    std::size_t arg = 0;
    for (std::size_t i = 1; i < rep.candidates.size(); ++i) {
      const auto& a = rep.candidates[i];
      const auto& b = rep.candidates[arg];
      if (a.criterion < b.criterion || (a.criterion == b.criterion && a.k < b.k)) arg = i;
    }
    rep.selected = arg;
  };
  pick(out.aic_report);
  pick(out.bic_report);
  return out;
}

namespace {

// Start the penalized fit from the initializer with one consecutive GSF pair
// tied at its midpoint: shapes and the transition structure survive, so the
// fit can keep the extra transition rows while the means fuse.
ParameterVector fusion_seed(const ParameterVector& base, std::size_t pair_index) {
  ParameterVector p = base;
  const auto vecs = gsf_vectors(p.emissions);
  const auto tau = gsf_order(vecs);
  if (pair_index + 1 >= tau.size()) return p;
  const std::size_t a = tau[pair_index];
  const std::size_t b = tau[pair_index + 1];
  for (std::size_t c = 0; c < p.emissions.n_channels(); ++c) {
    ChannelParams& pa = p.emissions.states[a][c];
    ChannelParams& pb = p.emissions.states[b][c];
    if (std::holds_alternative<GammaParams>(pa)) {
      const double mid =
          0.5 * (std::get<GammaParams>(pa).mean + std::get<GammaParams>(pb).mean);
      std::get<GammaParams>(pa).mean = mid;
      std::get<GammaParams>(pb).mean = mid;
    } else if (std::holds_alternative<NormalParams>(pa)) {
      const double mid =
          0.5 * (std::get<NormalParams>(pa).mean + std::get<NormalParams>(pb).mean);
      std::get<NormalParams>(pa).mean = mid;
      std::get<NormalParams>(pb).mean = mid;
    } else {
      const double mid =
          0.5 * (std::get<VonMisesParams>(pa).kappa + std::get<VonMisesParams>(pb).kappa);
      std::get<VonMisesParams>(pa).kappa = mid;
      std::get<VonMisesParams>(pb).kappa = mid;
    }
  }
  return p;
}

ParameterVector jitter_params(const ParameterVector& base, double rel_sd, Rng& rng) {
  ParameterVector p = base;
  for (auto& state : p.emissions.states) {
    for (auto& ch : state) {
      if (std::holds_alternative<GammaParams>(ch)) {
        auto& g = std::get<GammaParams>(ch);
        g.mean = std::max(g.mean * (1.0 + rel_sd * rng.normal()), 1e-3);
        g.shape = std::max(g.shape * (1.0 + rel_sd * rng.normal()), 1e-2);
      } else if (std::holds_alternative<NormalParams>(ch)) {
        auto& nm = std::get<NormalParams>(ch);
        nm.mean += rel_sd * std::max(std::fabs(nm.mean), 1.0) * rng.normal();
        nm.sd = std::max(nm.sd * (1.0 + rel_sd * rng.normal()), 1e-3);
      } else {
        auto& vm = std::get<VonMisesParams>(ch);
        vm.mean = Rng::wrap_angle(vm.mean + rel_sd * rng.normal());
        vm.kappa = std::max(vm.kappa * (1.0 + rel_sd * rng.normal()), 0.0);
      }
    }
  }
  return p;
}

}  // namespace

NicSearchResult nic_search(const ObservationSet& obs, int n_upper, const EmissionSpec& spec,
                           const NicSearchOptions& opts, std::uint64_t seed) {
  if (opts.draws < 1) throw config_error("nic_search: draws must be >= 1");
  obs.validate();
  const std::size_t n_obs = obs.total_length();
  const double m_weight = static_cast<double>(obs.total_length());

  // initializer: the best unpenalized fit at the order bound
  ParameterVector init = opts.init;
  if (init.delta.empty()) {
    OrderSelectOptions base_opts;
    base_opts.restarts = opts.init_restarts;
    base_opts.nonstationary = opts.nonstationary;
    base_opts.fit = opts.fit;
    const auto base = ic_order_select(obs, {n_upper}, spec, base_opts, seed ^ 0x1a17);
    init = base.best_fits[0].params;
  }

  NicSearchResult out;
  out.report.method = "NIC";
  Rng draw_rng = Rng::stream(seed, 0xd0a5);

  // stratified uniform draws: one point per equal-width stratum, so D draws
  // cover the whole interval; the C_N strata are paired through a seeded
  // shuffle to keep the two coordinates independent
  const int D = opts.draws;
  std::vector<int> cn_stratum(static_cast<std::size_t>(D));
  for (int i = 0; i < D; ++i) cn_stratum[static_cast<std::size_t>(i)] = i;
  for (int i = D - 1; i > 0; --i)
    std::swap(cn_stratum[static_cast<std::size_t>(i)],
              cn_stratum[draw_rng.uniform_index(static_cast<std::uint64_t>(i + 1))]);

  bool have = false;
  std::string last_error;
  for (int d = 0; d < D; ++d) {
    PenaltyConfig penalty;
    const double lam_span = opts.bounds.log_mlambda_hi - opts.bounds.log_mlambda_lo;
    const double cn_span = opts.bounds.c_n_hi - opts.bounds.c_n_lo;
    const double log_mlambda =
        opts.bounds.log_mlambda_lo + lam_span * (d + draw_rng.uniform()) / D;
    penalty.lambda = std::exp(log_mlambda) / m_weight;
    penalty.c_n = opts.bounds.c_n_lo +
                  cn_span * (cn_stratum[static_cast<std::size_t>(d)] + draw_rng.uniform()) / D;
    penalty.merge_tol = opts.merge_tol;

    DPMLEFit best_for_pair;
    bool have_pair = false;
    const int fusion_seeds = n_upper - 1;
    for (int r = 0; r < std::max(opts.dpmle_restarts, 1); ++r) {
      try {
        ParameterVector start = init;
        if (r >= 1 && r <= fusion_seeds) {
          start = fusion_seed(init, static_cast<std::size_t>(r - 1));
        } else if (r > fusion_seeds) {
          Rng jrng = Rng::stream(seed, 0x7e5700 + static_cast<std::uint64_t>(d * 64 + r));
          if (r % 2 == 1) {
            start = jitter_params(init, opts.jitter_sd, jrng);
            if (std::holds_alternative<Homogeneous>(start.transition))
              start.delta =
                  stationary_distribution(std::get<Homogeneous>(start.transition).gamma);
          } else {
            // fresh quantile-based starts reach fused basins the seeded ones
            // do not cover
            start = random_init(obs, spec, n_upper, opts.nonstationary, jrng);
          }
        }
        FitOptions per_start = opts.fit;
        per_start.fusion_polish = false;  // polish only the winner below
        DPMLEFit fit = fit_dpmle(obs, penalty, start, per_start);
        if (!have_pair || fit.penalized_objective > best_for_pair.penalized_objective) {
          best_for_pair = std::move(fit);
          have_pair = true;
        }
      } catch (const error& e) {
        last_error = e.what();
      }
    }
    if (!have_pair) continue;
    if (opts.fit.fusion_polish && penalty.lambda > 0.0) {
      try {
        DPMLEFit polished = fit_dpmle(obs, penalty, best_for_pair.params, opts.fit);
        if (polished.penalized_objective > best_for_pair.penalized_objective)
          best_for_pair = std::move(polished);
      } catch (const error& e) {
        last_error = e.what();
      }
    }

    const double ll = (opts.loglik_source == NicLoglik::Merged) ? best_for_pair.merged_loglik
                                                                : best_for_pair.loglik;
    const int k = num_params(best_for_pair.n_hat, spec.dim_theta1(),
                             static_cast<int>(obs.n_covariates()), opts.nonstationary);
    CandidateRecord rec;
    rec.order = best_for_pair.n_hat;
    rec.lambda = penalty.lambda;
    rec.c_n = penalty.c_n;
    rec.loglik = ll;
    rec.k = k;
    rec.criterion = nic(ll, k, static_cast<double>(n_obs));
    out.report.candidates.push_back(rec);

    bool better = !have;
    if (have) {
      const auto& cur = out.report.candidates[out.report.selected];
      if (rec.criterion < cur.criterion ||
          (rec.criterion == cur.criterion &&
           (rec.k < cur.k || (rec.k == cur.k && rec.lambda < cur.lambda))))
        better = true;
    }
    if (better) {
      out.report.selected = out.report.candidates.size() - 1;
      out.best_penalty = penalty;
      out.best_fit = std::move(best_for_pair);
      have = true;
    }
  }
  if (!have)
    throw convergence_error("nic_search: no hyperparameter draw produced a usable fit (last: " +
                                last_error + ")",
                            -std::numeric_limits<double>::infinity());
  return out;
}

}  // namespace dpmle
