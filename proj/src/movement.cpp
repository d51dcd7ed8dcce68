#include "dpmle/movement.hpp"

#include <algorithm>
#include <cmath>

#include "dpmle/errors.hpp"
#include "dpmle/rng.hpp"

namespace dpmle {

namespace {
constexpr double kDegToRad = M_PI / 180.0;
}

double haversine_km(double lat1_deg, double lon1_deg, double lat2_deg, double lon2_deg) {
  const double p1 = lat1_deg * kDegToRad;
  const double p2 = lat2_deg * kDegToRad;
  const double dp = (lat2_deg - lat1_deg) * kDegToRad;
  const double dl = (lon2_deg - lon1_deg) * kDegToRad;
  const double a = std::sin(dp / 2) * std::sin(dp / 2) +
                   std::cos(p1) * std::cos(p2) * std::sin(dl / 2) * std::sin(dl / 2);
  return 2.0 * kEarthRadiusKm * std::asin(std::min(1.0, std::sqrt(a)));
}

double initial_bearing_rad(double lat1_deg, double lon1_deg, double lat2_deg, double lon2_deg) {
  const double p1 = lat1_deg * kDegToRad;
  const double p2 = lat2_deg * kDegToRad;
  const double dl = (lon2_deg - lon1_deg) * kDegToRad;
  const double y = std::sin(dl) * std::cos(p2);
  const double x = std::cos(p1) * std::sin(p2) - std::sin(p1) * std::cos(p2) * std::cos(dl);
  return std::atan2(y, x);
}

void RawTrack::validate() const {
  std::int64_t prev = 0;
  bool first = true;
  for (const RawFix& f : fixes) {
    if (!first && f.timestamp <= prev)
      throw parse_error("track '" + id + "': timestamps must be strictly increasing");
    prev = f.timestamp;
    first = false;
    if (std::fabs(f.lat) > 90.0)
      throw parse_error("track '" + id + "': latitude outside [-90, 90]");
    if (std::fabs(f.lon) > 180.0)
      throw parse_error("track '" + id + "': longitude outside [-180, 180]");
    if (f.covariates.size() != covariate_names.size())
      throw parse_error("track '" + id + "': covariate count mismatch");
  }
}

HourlyTrack regularize_hourly(const RawTrack& track) {
  track.validate();
  HourlyTrack out;
  out.id = track.id;
  out.covariate_names = track.covariate_names;
  if (track.fixes.empty()) return out;

  // nearest hour, half-up at exactly 30 minutes
  auto to_hour = [](std::int64_t ts) -> std::int64_t {
    const std::int64_t shifted = ts + 1800;
    return shifted >= 0 ? shifted / 3600 : -((-shifted + 3599) / 3600);
  };

  const std::int64_t first = to_hour(track.fixes.front().timestamp);
  const std::int64_t last = to_hour(track.fixes.back().timestamp);
  out.start_hour = first;
  out.hours.assign(static_cast<std::size_t>(last - first + 1), HourlyFix{});

  for (const RawFix& f : track.fixes) {
    const std::int64_t h = to_hour(f.timestamp);
    HourlyFix& slot = out.hours[static_cast<std::size_t>(h - first)];
    // collisions keep the most recent original timestamp
    if (!slot.present || f.timestamp > slot.original_ts) {
      slot.present = true;
      slot.original_ts = f.timestamp;
      slot.lat = f.lat;
      slot.lon = f.lon;
      slot.covariates = f.covariates;
    }
  }
  return out;
}

namespace {

HourlyTrack slice(const HourlyTrack& track, std::size_t begin, std::size_t end) {
  HourlyTrack seg;
  seg.id = track.id;
  seg.covariate_names = track.covariate_names;
  seg.start_hour = track.start_hour + static_cast<std::int64_t>(begin);
  seg.hours.assign(track.hours.begin() + static_cast<std::ptrdiff_t>(begin),
                   track.hours.begin() + static_cast<std::ptrdiff_t>(end));
  return seg;
}

// trim leading/trailing missing hours
HourlyTrack trimmed(const HourlyTrack& t) {
  std::size_t b = 0, e = t.hours.size();
  while (b < e && !t.hours[b].present) ++b;
  while (e > b && !t.hours[e - 1].present) --e;
  return slice(t, b, e);
}

void enforce_missing_rule(const HourlyTrack& seg, const SplitOptions& opts,
                          std::vector<HourlyTrack>& out) {
  if (seg.fix_count() < static_cast<std::size_t>(opts.min_len)) return;  // dropped
  if (seg.missing_fraction() < opts.max_missing_frac) {
    out.push_back(seg);
    return;
  }
  // split at the longest internal run of missing hours, then recurse
  std::size_t best_start = 0, best_len = 0, run_start = 0, run_len = 0;
  for (std::size_t i = 0; i < seg.hours.size(); ++i) {
    if (!seg.hours[i].present) {
      if (run_len == 0) run_start = i;
      ++run_len;
      if (run_len > best_len) { best_len = run_len; best_start = run_start; }
    } else {
      run_len = 0;
    }
  }
  if (best_len == 0) return;  // all present yet over the threshold: impossible
  enforce_missing_rule(trimmed(slice(seg, 0, best_start)), opts, out);
  enforce_missing_rule(trimmed(slice(seg, best_start + best_len, seg.hours.size())), opts, out);
}

}  // namespace

std::vector<HourlyTrack> split_segments(const HourlyTrack& track, const SplitOptions& opts) {
  std::vector<HourlyTrack> segments;
  const HourlyTrack base = trimmed(track);
  if (base.hours.empty()) return segments;

  // primary split: a new segment begins after more than gap_hours
  // consecutive missing hours
  std::size_t seg_begin = 0;
  std::size_t i = 0;
  while (i < base.hours.size()) {
    if (base.hours[i].present) { ++i; continue; }
    std::size_t run_start = i;
    while (i < base.hours.size() && !base.hours[i].present) ++i;
    const std::size_t run_len = i - run_start;
    if (run_len > static_cast<std::size_t>(opts.gap_hours)) {
      enforce_missing_rule(trimmed(slice(base, seg_begin, run_start)), opts, segments);
      seg_begin = i;
    }
  }
  enforce_missing_rule(trimmed(slice(base, seg_begin, base.hours.size())), opts, segments);

  for (std::size_t k = 0; k < segments.size(); ++k)
    segments[k].id = track.id + "-" + std::to_string(k + 1);
  return segments;
}

StepAngleSeries steps_and_angles(const HourlyTrack& segment) {
  StepAngleSeries out;
  out.segment_id = segment.id;
  out.covariate_names = segment.covariate_names;
  const std::size_t n = segment.hours.size();
  out.records.resize(n);

  // step into hour i and its bearing, when both endpoints are present
  std::vector<bool> has_step(n, false);
  std::vector<double> step(n, 0.0), bearing(n, 0.0);
  for (std::size_t i = 1; i < n; ++i) {
    const HourlyFix& a = segment.hours[i - 1];
    const HourlyFix& b = segment.hours[i];
    if (!a.present || !b.present) continue;
    has_step[i] = true;
    step[i] = haversine_km(a.lat, a.lon, b.lat, b.lon);
    bearing[i] = initial_bearing_rad(a.lat, a.lon, b.lat, b.lon);
  }

  for (std::size_t i = 0; i < n; ++i) {
    StepAngleRecord& r = out.records[i];
    r.hour = segment.start_hour + static_cast<std::int64_t>(i);
    if (segment.hours[i].present) {
      r.cov_missing = false;
      r.covariates = segment.hours[i].covariates;
    }
    if (has_step[i]) {
      r.step_missing = false;
      r.step_km = step[i];
    }
    // a defined angle needs both adjacent steps present and positive
    if (i >= 2 && has_step[i] && has_step[i - 1] && step[i] > 0.0 && step[i - 1] > 0.0) {
      r.angle_missing = false;
      r.angle_rad = Rng::wrap_angle(bearing[i] - bearing[i - 1]);
    }
  }
  return out;
}

}  // namespace dpmle
