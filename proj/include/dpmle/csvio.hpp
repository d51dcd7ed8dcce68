#ifndef DPMLE_CSVIO_HPP
#define DPMLE_CSVIO_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "dpmle/movement.hpp"
#include "dpmle/observations.hpp"

namespace dpmle {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const;  // -1 when absent
};

CsvTable read_csv(const std::string& path);
void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

// ISO-8601 UTC timestamps ("2017-08-01T05:58:00Z"; a space separator and a
// missing Z are accepted on input).
std::int64_t parse_iso8601_utc(const std::string& s);
std::string format_iso8601_utc(std::int64_t ts);
inline std::string format_hour_iso(std::int64_t hour) { return format_iso8601_utc(hour * 3600); }

// Raw track CSV: id,timestamp,lat,lon[,covariate...].
std::vector<RawTrack> read_tracks_csv(const std::string& path);

// Processed CSV: segment_id,hour,step_km,angle_rad[,covariate...], empty
// fields for missing values.
void write_step_angle_csv(const std::string& path, const std::vector<StepAngleSeries>& series);

// Observation CSV: series_id,t,<channel...>[,<covariate...>]; empty fields
// mark masked values. Channel kinds control validation (angles vs. linear).
ObservationSet read_observations_csv(const std::string& path,
                                     const std::vector<ChannelSpec>& channels,
                                     const std::vector<std::string>& covariates);
void write_observations_csv(const std::string& path, const ObservationSet& obs);

}  // namespace dpmle

#endif
