#ifndef DPMLE_MOVEMENT_HPP
#define DPMLE_MOVEMENT_HPP

#include <cstdint>
#include <string>
#include <vector>

namespace dpmle {

// mean Earth radius, km
inline constexpr double kEarthRadiusKm = 6371.0088;

double haversine_km(double lat1_deg, double lon1_deg, double lat2_deg, double lon2_deg);

// initial great-circle bearing, radians clockwise from north
double initial_bearing_rad(double lat1_deg, double lon1_deg, double lat2_deg, double lon2_deg);

struct RawFix {
  std::int64_t timestamp = 0;  // seconds since the Unix epoch, UTC
  double lat = 0.0;
  double lon = 0.0;
  std::vector<double> covariates;
};

struct RawTrack {
  std::string id;
  std::vector<std::string> covariate_names;
  std::vector<RawFix> fixes;

  void validate() const;
};

struct HourlyFix {
  bool present = false;
  std::int64_t original_ts = 0;
  double lat = 0.0;
  double lon = 0.0;
  std::vector<double> covariates;
};

// A track resampled onto an hourly grid; hours[i] is start_hour + i.
struct HourlyTrack {
  std::string id;
  std::vector<std::string> covariate_names;
  std::int64_t start_hour = 0;  // hours since the epoch
  std::vector<HourlyFix> hours;

  std::size_t fix_count() const {
    std::size_t c = 0;
    for (const auto& h : hours) c += h.present ? 1 : 0;
    return c;
  }
  double missing_fraction() const {
    if (hours.empty()) return 0.0;
    return 1.0 - static_cast<double>(fix_count()) / static_cast<double>(hours.size());
  }
};

// Assigns each fix to its nearest hour (half-up at exactly 30 minutes);
// collisions keep the fix with the latest original timestamp.
HourlyTrack regularize_hourly(const RawTrack& track);

struct SplitOptions {
  int gap_hours = 12;             // split after more than this many missing hours
  int min_len = 6;                // minimum number of fixes per kept segment
  double max_missing_frac = 0.5;  // segments must stay below this missing share
};

// Splits at long gaps, enforces the missing-fraction rule by splitting at the
// longest internal gap, and drops segments that are too short. Segment ids
// are "<track>-1", "<track>-2", ...
std::vector<HourlyTrack> split_segments(const HourlyTrack& track, const SplitOptions& opts = {});

struct StepAngleRecord {
  std::int64_t hour = 0;
  bool step_missing = true;
  double step_km = 0.0;
  bool angle_missing = true;
  double angle_rad = 0.0;
  bool cov_missing = true;
  std::vector<double> covariates;
};

struct StepAngleSeries {
  std::string segment_id;
  std::vector<std::string> covariate_names;
  std::vector<StepAngleRecord> records;  // one per hour of the segment span
};

// Derives step lengths (great-circle) and turning angles (signed bearing
// change wrapped to (-pi, pi]; a full reversal maps to +pi). Steps and angles
// adjacent to missing hours are missing; angles additionally require both
// adjacent steps to be positive.
StepAngleSeries steps_and_angles(const HourlyTrack& segment);

}  // namespace dpmle

#endif
