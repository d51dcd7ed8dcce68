#include "dpmle/csvio.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "dpmle/errors.hpp"

namespace dpmle {

int CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return static_cast<int>(i);
  return -1;
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

double parse_double(const std::string& s, const std::string& what, std::size_t line_no) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0')
    throw parse_error("line " + std::to_string(line_no) + ": cannot parse " + what + " from '" +
                      s + "'");
  return v;
}

}  // namespace

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open '" + path + "'");
  CsvTable t;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || (line.size() == 1 && line[0] == '\r')) continue;
    auto fields = split_line(line);
    if (line_no == 1) {
      t.header = std::move(fields);
    } else {
      if (fields.size() != t.header.size())
        throw parse_error("line " + std::to_string(line_no) + ": expected " +
                          std::to_string(t.header.size()) + " fields, got " +
                          std::to_string(fields.size()));
      t.rows.push_back(std::move(fields));
    }
  }
  if (t.header.empty()) throw parse_error("'" + path + "': empty file");
  return t;
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot write '" + path + "'");
  for (std::size_t i = 0; i < header.size(); ++i)
    out << header[i] << (i + 1 < header.size() ? "," : "\n");
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i)
      out << row[i] << (i + 1 < row.size() ? "," : "\n");
  }
  if (!out) throw io_error("failed while writing '" + path + "'");
}

namespace {

// Howard Hinnant's civil-date algorithms.
std::int64_t days_from_civil(int y, int m, int d) {
  y -= m <= 2;
  const int era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = static_cast<unsigned>((153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1);
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return static_cast<std::int64_t>(era) * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

void civil_from_days(std::int64_t z, int& y, int& m, int& d) {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const std::int64_t yy = static_cast<std::int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  d = static_cast<int>(doy - (153 * mp + 2) / 5 + 1);
  m = static_cast<int>(mp + (mp < 10 ? 3 : -9));
  y = static_cast<int>(yy + (m <= 2));
}

}  // namespace

std::int64_t parse_iso8601_utc(const std::string& s) {
  int y = 0, mo = 0, d = 0, h = 0, mi = 0, sec = 0;
  char sep = 0;
  const int n = std::sscanf(s.c_str(), "%d-%d-%d%c%d:%d:%d", &y, &mo, &d, &sep, &h, &mi, &sec);
  if (n < 7 || (sep != 'T' && sep != ' '))
    throw parse_error("cannot parse timestamp '" + s + "' (expected YYYY-MM-DDTHH:MM:SSZ)");
  if (mo < 1 || mo > 12 || d < 1 || d > 31 || h < 0 || h > 23 || mi < 0 || mi > 59 || sec < 0 ||
      sec > 60)
    throw parse_error("timestamp out of range: '" + s + "'");
  return days_from_civil(y, mo, d) * 86400 + h * 3600 + mi * 60 + sec;
}

std::string format_iso8601_utc(std::int64_t ts) {
  std::int64_t days = ts / 86400;
  std::int64_t rem = ts % 86400;
  if (rem < 0) { rem += 86400; days -= 1; }
  int y, m, d;
  civil_from_days(days, y, m, d);
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02dZ", y, m, d,
                static_cast<int>(rem / 3600), static_cast<int>((rem % 3600) / 60),
                static_cast<int>(rem % 60));
  return buf;
}

std::vector<RawTrack> read_tracks_csv(const std::string& path) {
  const CsvTable t = read_csv(path);
  if (t.header.size() < 4 || t.header[0] != "id" || t.header[1] != "timestamp" ||
      t.header[2] != "lat" || t.header[3] != "lon")
    throw parse_error("'" + path +
                      "': expected raw track schema id,timestamp,lat,lon[,covariate...]; got '" +
                      (t.header.empty() ? "" : t.header[0]) +
                      ",...' (already-processed files are not accepted here)");
  std::vector<std::string> cov_names(t.header.begin() + 4, t.header.end());

  std::vector<RawTrack> tracks;
  std::size_t line_no = 1;
  for (const auto& row : t.rows) {
    ++line_no;
    if (tracks.empty() || tracks.back().id != row[0]) {
      RawTrack tr;
      tr.id = row[0];
      tr.covariate_names = cov_names;
      tracks.push_back(std::move(tr));
    }
    RawFix f;
    f.timestamp = parse_iso8601_utc(row[1]);
    f.lat = parse_double(row[2], "lat", line_no);
    f.lon = parse_double(row[3], "lon", line_no);
    for (std::size_t c = 4; c < row.size(); ++c)
      f.covariates.push_back(parse_double(row[c], t.header[c], line_no));
    tracks.back().fixes.push_back(std::move(f));
  }
  for (const auto& tr : tracks) tr.validate();
  return tracks;
}

void write_step_angle_csv(const std::string& path, const std::vector<StepAngleSeries>& series) {
  std::vector<std::string> header{"segment_id", "hour", "step_km", "angle_rad"};
  if (!series.empty())
    header.insert(header.end(), series[0].covariate_names.begin(),
                  series[0].covariate_names.end());
  std::vector<std::vector<std::string>> rows;
  char buf[32];
  auto fmt = [&buf](double v) {
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return std::string(buf);
  };
  for (const auto& s : series) {
    for (const auto& r : s.records) {
      std::vector<std::string> row{s.segment_id, format_hour_iso(r.hour),
                                   r.step_missing ? "" : fmt(r.step_km),
                                   r.angle_missing ? "" : fmt(r.angle_rad)};
      for (std::size_t c = 0; c < s.covariate_names.size(); ++c)
        row.push_back(r.cov_missing ? "" : fmt(r.covariates[c]));
      rows.push_back(std::move(row));
    }
  }
  write_csv(path, header, rows);
}

ObservationSet read_observations_csv(const std::string& path,
                                     const std::vector<ChannelSpec>& channels,
                                     const std::vector<std::string>& covariates) {
  const CsvTable t = read_csv(path);
  std::vector<int> ch_cols, cov_cols;
  for (const auto& ch : channels) {
    const int c = t.column(ch.name);
    if (c < 0) throw parse_error("'" + path + "': missing channel column '" + ch.name + "'");
    ch_cols.push_back(c);
  }
  for (const auto& cv : covariates) {
    const int c = t.column(cv);
    if (c < 0) throw parse_error("'" + path + "': missing covariate column '" + cv + "'");
    cov_cols.push_back(c);
  }

  ObservationSet obs;
  obs.channels = channels;
  obs.covariate_names = covariates;
  std::size_t line_no = 1;
  for (const auto& row : t.rows) {
    ++line_no;
    const std::string& id = row[0];
    if (obs.series.empty() || obs.series.back().id != id) {
      // series must be contiguous; a reappearing id means a shuffled file
      for (const auto& s : obs.series)
        if (s.id == id)
          throw parse_error("line " + std::to_string(line_no) + ": series '" + id +
                            "' is not contiguous");
      Series s;
      s.id = id;
      s.values.assign(channels.size(), {});
      s.missing.assign(channels.size(), {});
      s.n_covariates = covariates.size();
      obs.series.push_back(std::move(s));
    }
    Series& s = obs.series.back();
    for (std::size_t c = 0; c < ch_cols.size(); ++c) {
      const std::string& cell = row[static_cast<std::size_t>(ch_cols[c])];
      if (cell.empty()) {
        s.values[c].push_back(0.0);
        s.missing[c].push_back(1);
      } else {
        s.values[c].push_back(parse_double(cell, channels[c].name, line_no));
        s.missing[c].push_back(0);
      }
    }
    for (std::size_t c = 0; c < cov_cols.size(); ++c) {
      const std::string& cell = row[static_cast<std::size_t>(cov_cols[c])];
      if (cell.empty())
        throw parse_error("line " + std::to_string(line_no) + ": covariate '" + covariates[c] +
                          "' is missing (covariates must be complete)");
      s.covariates.push_back(parse_double(cell, covariates[c], line_no));
    }
  }
  obs.validate();
  return obs;
}

void write_observations_csv(const std::string& path, const ObservationSet& obs) {
  std::vector<std::string> header{"series_id", "t"};
  for (const auto& ch : obs.channels) header.push_back(ch.name);
  for (const auto& cv : obs.covariate_names) header.push_back(cv);

  std::vector<std::vector<std::string>> rows;
  char buf[40];
  auto fmt = [&buf](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
  };
  for (const auto& s : obs.series) {
    for (std::size_t t = 0; t < s.length(); ++t) {
      std::vector<std::string> row{s.id, std::to_string(t + 1)};
      for (std::size_t c = 0; c < obs.channels.size(); ++c)
        row.push_back(s.is_missing(c, t) ? "" : fmt(s.values[c][t]));
      for (std::size_t c = 0; c < s.n_covariates; ++c)
        row.push_back(fmt(s.covariate_row(t)[c]));
      rows.push_back(std::move(row));
    }
  }
  write_csv(path, header, rows);
}

}  // namespace dpmle
