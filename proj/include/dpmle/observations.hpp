#ifndef DPMLE_OBSERVATIONS_HPP
#define DPMLE_OBSERVATIONS_HPP

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "dpmle/errors.hpp"

namespace dpmle {

// Linear channels are nonnegative (step lengths), Real channels unconstrained,
// Angle channels live in (-pi, pi].
enum class ChannelKind { Linear, Real, Angle };

struct ChannelSpec {
  std::string name;
  ChannelKind kind = ChannelKind::Linear;
};

// One individual's time series: channel-major values with a missing mask,
// plus an optional row-major T x C covariate block.
struct Series {
  std::string id;
  std::vector<std::vector<double>> values;    // [channel][t]
  std::vector<std::vector<std::uint8_t>> missing;  // [channel][t], 1 = masked
  std::vector<double> covariates;             // row-major T x n_covariates
  std::size_t n_covariates = 0;

  std::size_t length() const { return values.empty() ? 0 : values[0].size(); }

  bool is_missing(std::size_t channel, std::size_t t) const {
    return missing[channel][t] != 0;
  }

  const double* covariate_row(std::size_t t) const {
    return covariates.data() + t * n_covariates;
  }
};

struct ObservationSet {
  std::vector<ChannelSpec> channels;
  std::vector<std::string> covariate_names;
  std::vector<Series> series;

  std::size_t n_channels() const { return channels.size(); }
  std::size_t n_covariates() const { return covariate_names.size(); }

  std::size_t total_length() const {
    std::size_t n = 0;
    for (const auto& s : series) n += s.length();
    return n;
  }

  void validate() const;
};

inline void ObservationSet::validate() const {
  const std::size_t nch = channels.size();
  const std::size_t ncov = covariate_names.size();
  for (const auto& s : series) {
    if (s.values.size() != nch || s.missing.size() != nch)
      throw dimension_error("series '" + s.id + "': channel count mismatch");
    const std::size_t t_len = s.length();
    if (t_len < 2)
      throw dimension_error("series '" + s.id + "': length must be >= 2");
    for (std::size_t c = 0; c < nch; ++c) {
      if (s.values[c].size() != t_len || s.missing[c].size() != t_len)
        throw dimension_error("series '" + s.id + "': ragged channel data");
      for (std::size_t t = 0; t < t_len; ++t) {
        if (s.missing[c][t]) continue;
        const double v = s.values[c][t];
        if (!std::isfinite(v))
          throw numeric_error("series '" + s.id + "': non-finite observation");
        if (channels[c].kind == ChannelKind::Linear && v < 0.0)
          throw numeric_error("series '" + s.id + "': negative value in channel '" +
                              channels[c].name + "'");
        if (channels[c].kind == ChannelKind::Angle && (v <= -M_PI - 1e-12 || v > M_PI + 1e-12))
          throw numeric_error("series '" + s.id + "': angle outside (-pi, pi] in channel '" +
                              channels[c].name + "'");
      }
    }
    if (s.n_covariates != ncov)
      throw dimension_error("series '" + s.id + "': covariate count mismatch");
    if (ncov > 0 && s.covariates.size() != t_len * ncov)
      throw dimension_error("series '" + s.id + "': covariate matrix must have T rows");
  }
}

}  // namespace dpmle

#endif
