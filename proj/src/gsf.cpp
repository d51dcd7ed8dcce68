#include <algorithm>
#include <cmath>

#include "dpmle/errors.hpp"
#include "dpmle/penalized_em.hpp"

namespace dpmle {

std::vector<std::vector<double>> gsf_vectors(const EmissionParams& em) {
  const std::size_t n = em.order();
  const std::size_t nch = em.n_channels();
  std::vector<std::vector<double>> vecs(n, std::vector<double>(nch));
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t c = 0; c < nch; ++c)
      vecs[j][c] = penalized_coordinate(em.states[j][c]);
  if (nch <= 1) return vecs;  // scalar gaps stay in natural units
  // standardize each coordinate by its cross-state standard deviation
  for (std::size_t c = 0; c < nch; ++c) {
    double mean = 0.0;
    for (std::size_t j = 0; j < n; ++j) mean += vecs[j][c];
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) var += (vecs[j][c] - mean) * (vecs[j][c] - mean);
    const double sd = (n > 1 && var > 0.0) ? std::sqrt(var / static_cast<double>(n - 1)) : 1.0;
    for (std::size_t j = 0; j < n; ++j) vecs[j][c] /= sd;
  }
  return vecs;
}

namespace {

double l2_norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

double l2_dist(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

}  // namespace

std::vector<std::size_t> gsf_order(const std::vector<std::vector<double>>& mu_vectors) {
  const std::size_t n = mu_vectors.size();
  if (n == 0) return {};
  const std::size_t dim = mu_vectors[0].size();
  for (const auto& v : mu_vectors)
    if (v.size() != dim) throw dimension_error("gsf_order: vectors must share a dimension");

  std::vector<std::size_t> tau;
  tau.reserve(n);
  std::vector<bool> used(n, false);
  // start at the smallest norm, then chain to the nearest unchosen state;
  // ties go to the lower original index (strict < keeps the first minimum)
  std::size_t best = 0;
  double best_val = l2_norm(mu_vectors[0]);
  for (std::size_t j = 1; j < n; ++j) {
    const double v = l2_norm(mu_vectors[j]);
    if (v < best_val) { best_val = v; best = j; }
  }
  tau.push_back(best);
  used[best] = true;
  while (tau.size() < n) {
    const auto& anchor = mu_vectors[tau.back()];
    std::size_t arg = n;
    double dist = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (used[j]) continue;
      const double d = l2_dist(mu_vectors[j], anchor);
      if (arg == n || d < dist) { arg = j; dist = d; }
    }
    tau.push_back(arg);
    used[arg] = true;
  }
  return tau;
}

std::vector<double> gsf_gaps(const std::vector<std::vector<double>>& vectors,
                             const std::vector<std::size_t>& tau) {
  std::vector<double> gaps;
  if (tau.size() < 2) return gaps;
  gaps.reserve(tau.size() - 1);
  for (std::size_t k = 1; k < tau.size(); ++k)
    gaps.push_back(l2_dist(vectors[tau[k]], vectors[tau[k - 1]]));
  return gaps;
}

StateGrouping count_distinct_states(const ParameterVector& params, double merge_tol) {
  const auto vecs = gsf_vectors(params.emissions);
  const auto tau = gsf_order(vecs);
  const auto gaps = gsf_gaps(vecs, tau);

  // threshold relative to the spread of the fitted means/norms
  double lo = l2_norm(vecs[tau.front()]);
  double hi = lo;
  for (std::size_t j = 0; j < vecs.size(); ++j) {
    const double v = l2_norm(vecs[j]);
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  const double threshold = merge_tol * (hi - lo);

  StateGrouping out;
  out.groups.push_back({tau[0]});
  for (std::size_t k = 1; k < tau.size(); ++k) {
    if (gaps[k - 1] <= threshold)
      out.groups.back().push_back(tau[k]);
    else
      out.groups.push_back({tau[k]});
  }
  out.n_hat = static_cast<int>(out.groups.size());
  return out;
}

namespace {

ChannelParams average_channel(const std::vector<ChannelParams>& members,
                              const std::vector<double>& weights) {
  double wsum = 0.0;
  for (double w : weights) wsum += w;
  std::vector<double> wn(weights);
  if (wsum <= 0.0)
    wn.assign(weights.size(), 1.0 / static_cast<double>(weights.size()));
  else
    for (double& w : wn) w /= wsum;

  if (std::holds_alternative<GammaParams>(members[0])) {
    GammaParams g{0.0, 0.0};
    for (std::size_t i = 0; i < members.size(); ++i) {
      g.mean += wn[i] * std::get<GammaParams>(members[i]).mean;
      g.shape += wn[i] * std::get<GammaParams>(members[i]).shape;
    }
    return g;
  }
  if (std::holds_alternative<NormalParams>(members[0])) {
    NormalParams p{0.0, 0.0};
    for (std::size_t i = 0; i < members.size(); ++i) {
      p.mean += wn[i] * std::get<NormalParams>(members[i]).mean;
      p.sd += wn[i] * std::get<NormalParams>(members[i]).sd;
    }
    return p;
  }
  // angles average circularly; concentrations arithmetically
  double c = 0.0, s = 0.0;
  VonMisesParams vm{0.0, 0.0};
  for (std::size_t i = 0; i < members.size(); ++i) {
    const auto& v = std::get<VonMisesParams>(members[i]);
    c += wn[i] * std::cos(v.mean);
    s += wn[i] * std::sin(v.mean);
    vm.kappa += wn[i] * v.kappa;
  }
  vm.mean = std::atan2(s, c);
  if (vm.mean <= -M_PI) vm.mean = M_PI;
  return vm;
}

}  // namespace

ParameterVector merge_model(const ParameterVector& params, const StateGrouping& grouping,
                            const std::vector<double>& state_weights) {
  const std::size_t n = params.order();
  const std::size_t g = grouping.groups.size();
  std::size_t covered = 0;
  for (const auto& grp : grouping.groups) {
    if (grp.empty()) throw error("merge_model: empty group");
    covered += grp.size();
  }
  if (covered != n) throw dimension_error("merge_model: grouping must cover every state");
  if (g == n) return params;  // identity grouping

  std::vector<double> weights = state_weights;
  if (weights.empty()) weights.assign(n, 1.0);

  ParameterVector out;
  out.delta_mode = params.delta_mode;

  // emissions: u-weighted averages within groups
  out.emissions.states.resize(g);
  for (std::size_t a = 0; a < g; ++a) {
    const auto& grp = grouping.groups[a];
    const std::size_t nch = params.emissions.n_channels();
    out.emissions.states[a].resize(nch);
    for (std::size_t c = 0; c < nch; ++c) {
      std::vector<ChannelParams> members;
      std::vector<double> w;
      for (std::size_t i : grp) {
        members.push_back(params.emissions.states[i][c]);
        w.push_back(weights[i]);
      }
      out.emissions.states[a][c] = average_channel(members, w);
    }
  }

  // transitions: merged probability A -> B averages the row sums over A
  if (std::holds_alternative<Homogeneous>(params.transition)) {
    const Matrix& full = std::get<Homogeneous>(params.transition).gamma;
    Matrix merged(g, g);
    for (std::size_t a = 0; a < g; ++a) {
      for (std::size_t b = 0; b < g; ++b) {
        double s = 0.0;
        for (std::size_t i : grouping.groups[a])
          for (std::size_t j : grouping.groups[b]) s += full(i, j);
        merged(a, b) = s / static_cast<double>(grouping.groups[a].size());
      }
    }
    out.transition = Homogeneous{merged};
  } else if (std::holds_alternative<CovariateLogit>(params.transition)) {
    out.transition = MergedLogit{std::get<CovariateLogit>(params.transition), grouping.groups};
  } else {
    // merging an already-merged model: compose the groupings
    const auto& prev = std::get<MergedLogit>(params.transition);
    std::vector<std::vector<std::size_t>> composed(g);
    for (std::size_t a = 0; a < g; ++a)
      for (std::size_t i : grouping.groups[a])
        composed[a].insert(composed[a].end(), prev.groups[i].begin(), prev.groups[i].end());
    out.transition = MergedLogit{prev.base, composed};
  }

  // initial distribution: group sums, or the stationary law of the merged tpm
  out.delta.assign(g, 0.0);
  if (params.delta_mode == DeltaMode::Stationary &&
      std::holds_alternative<Homogeneous>(out.transition)) {
    out.delta = stationary_distribution(std::get<Homogeneous>(out.transition).gamma);
  } else {
    for (std::size_t a = 0; a < g; ++a)
      for (std::size_t i : grouping.groups[a]) out.delta[a] += params.delta[i];
    double s = 0.0;
    for (double d : out.delta) s += d;
    for (double& d : out.delta) d /= s;
  }
  return out;
}

}  // namespace dpmle
