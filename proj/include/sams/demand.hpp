#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <random>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "sams/common.hpp"
#include "sams/domain.hpp"

namespace sams {

struct TripRecord {
  double pickup_time = 0.0;   // seconds from the configured horizon origin
  double dropoff_time = 0.0;
  Position pickup{};
  Position dropoff{};
  double trip_distance_km = 0.0;
  int passenger_count = 0;
  int day_of_week = 0;  // 0 = Sunday .. 6 = Saturday, from the pickup date
};

struct DemandRequest {
  double request_time = 0.0;
  Position origin{};
  Position destination{};
};

struct DemandStream {
  std::vector<DemandRequest> requests;  // sorted by request_time
  std::uint64_t seed = 0;
  double demand_fraction = 1.0;
};

enum class DayFilter { All, Weekday, Weekend };

namespace detail {

// Days since 1970-01-01 for a civil date (Howard Hinnant's algorithm).
inline std::int64_t days_from_civil(int y, int m, int d) {
  y -= m <= 2;
  const int era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153u * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return static_cast<std::int64_t>(era) * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

struct ParsedTimestamp {
  std::int64_t epoch_seconds = 0;
  int day_of_week = 0;
};

// Accepts "YYYY-MM-DD HH:MM:SS" and "YYYY-MM-DDTHH:MM:SS".
inline bool parse_timestamp(const std::string& s, ParsedTimestamp& out) {
  int y, mo, d, h, mi, se;
  char sep;
  if (std::sscanf(s.c_str(), "%d-%d-%d%c%d:%d:%d", &y, &mo, &d, &sep, &h, &mi, &se) != 7)
    return false;
  if ((sep != ' ' && sep != 'T') || mo < 1 || mo > 12 || d < 1 || d > 31 ||
      h < 0 || h > 23 || mi < 0 || mi > 59 || se < 0 || se > 60)
    return false;
  const std::int64_t days = days_from_civil(y, mo, d);
  out.epoch_seconds = days * 86400 + h * 3600 + mi * 60 + se;
  out.day_of_week = static_cast<int>(((days % 7) + 11) % 7);  // 1970-01-01 is a Thursday
  return true;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  fields.push_back(cur);
  return fields;
}

}  // namespace detail

struct IngestOptions {
  std::string horizon_origin;   // timestamp mapped to t = 0
  double geo_origin_lon = 0.0;  // lon/lat mapped to region (0, 0)
  double geo_origin_lat = 0.0;
  bool strict = false;          // abort on the first malformed row
};

struct IngestReport {
  std::int64_t total_rows = 0;
  std::int64_t kept = 0;
  std::int64_t dropped_malformed = 0;
  std::int64_t dropped_zero_distance = 0;
  std::int64_t dropped_out_of_region = 0;
  std::int64_t dropped_bad_time = 0;  // dropoff earlier than pickup

  std::string to_json() const {
    std::ostringstream os;
    os << "{\"total_rows\":" << total_rows << ",\"kept\":" << kept
       << ",\"dropped_malformed\":" << dropped_malformed
       << ",\"dropped_zero_distance\":" << dropped_zero_distance
       << ",\"dropped_out_of_region\":" << dropped_out_of_region
       << ",\"dropped_bad_time\":" << dropped_bad_time << "}";
    return os.str();
  }
};

struct IngestResult {
  std::vector<TripRecord> records;
  IngestReport report;
};

inline constexpr double kEarthRadiusM = 6371000.0;

// Equirectangular projection about the region's center latitude; adequate at
// city scale.
inline Position project_lonlat(double lon, double lat, const IngestOptions& opt,
                               const ServiceRegion& region) {
  const double deg = M_PI / 180.0;
  const double ref_lat =
      opt.geo_origin_lat + 0.5 * region.bounds.height() / (kEarthRadiusM * deg);
  const double x = (lon - opt.geo_origin_lon) * deg * kEarthRadiusM * std::cos(ref_lat * deg);
  const double y = (lat - opt.geo_origin_lat) * deg * kEarthRadiusM;
  return {x, y};
}

// Trip-record CSV ingestion. Header is required; the expected columns are
// pickup_datetime, dropoff_datetime, pickup_longitude, pickup_latitude,
// dropoff_longitude, dropoff_latitude, trip_distance, passenger_count.
// Zero-distance and out-of-region trips are dropped and tallied.
inline IngestResult ingest(std::istream& in, const ServiceRegion& region,
                           const IngestOptions& opt) {
  IngestResult out;
  std::string line;
  if (!std::getline(in, line)) throw DataError("ingest: empty input, header required");

  const std::vector<std::string> header = detail::split_csv_line(line);
  std::unordered_map<std::string, int> col;
  for (int i = 0; i < static_cast<int>(header.size()); ++i) col[header[i]] = i;
  const char* required[] = {"pickup_datetime",  "dropoff_datetime", "pickup_longitude",
                            "pickup_latitude",  "dropoff_longitude", "dropoff_latitude",
                            "trip_distance",    "passenger_count"};
  for (const char* name : required) {
    if (!col.count(name)) throw DataError(std::string("ingest: missing column ") + name);
  }

  detail::ParsedTimestamp origin_ts;
  if (!detail::parse_timestamp(opt.horizon_origin, origin_ts))
    throw ConfigError("ingest: bad horizon_origin timestamp '" + opt.horizon_origin + "'");

  auto field = [&](const std::vector<std::string>& row, const char* name) -> const std::string& {
    return row[static_cast<std::size_t>(col.at(name))];
  };

  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    ++out.report.total_rows;
    const std::vector<std::string> row = detail::split_csv_line(line);
    auto malformed = [&](const std::string& why) {
      if (opt.strict) throw DataError("ingest: malformed row " +
                                      std::to_string(out.report.total_rows) + ": " + why);
      ++out.report.dropped_malformed;
    };
    if (row.size() < header.size()) {
      malformed("wrong field count");
      continue;
    }
    detail::ParsedTimestamp pu_ts, do_ts;
    if (!detail::parse_timestamp(field(row, "pickup_datetime"), pu_ts) ||
        !detail::parse_timestamp(field(row, "dropoff_datetime"), do_ts)) {
      malformed("unparsable timestamp");
      continue;
    }
    double pu_lon, pu_lat, do_lon, do_lat, dist;
    int pax;
    try {
      pu_lon = std::stod(field(row, "pickup_longitude"));
      pu_lat = std::stod(field(row, "pickup_latitude"));
      do_lon = std::stod(field(row, "dropoff_longitude"));
      do_lat = std::stod(field(row, "dropoff_latitude"));
      dist = std::stod(field(row, "trip_distance"));
      pax = std::stoi(field(row, "passenger_count"));
    } catch (const std::exception&) {
      malformed("unparsable number");
      continue;
    }
    if (dist <= 0.0) {
      ++out.report.dropped_zero_distance;
      continue;
    }
    if (do_ts.epoch_seconds < pu_ts.epoch_seconds) {
      ++out.report.dropped_bad_time;
      continue;
    }
    TripRecord rec;
    rec.pickup = project_lonlat(pu_lon, pu_lat, opt, region);
    rec.dropoff = project_lonlat(do_lon, do_lat, opt, region);
    if (!region.bounds.contains(rec.pickup) || !region.bounds.contains(rec.dropoff)) {
      ++out.report.dropped_out_of_region;
      continue;
    }
    rec.pickup_time = static_cast<double>(pu_ts.epoch_seconds - origin_ts.epoch_seconds);
    rec.dropoff_time = static_cast<double>(do_ts.epoch_seconds - origin_ts.epoch_seconds);
    rec.trip_distance_km = dist;
    rec.passenger_count = pax;
    rec.day_of_week = pu_ts.day_of_week;
    out.records.push_back(rec);
    ++out.report.kept;
  }
  return out;
}

inline bool matches_day_filter(const TripRecord& rec, DayFilter filter) {
  const bool weekend = rec.day_of_week == 0 || rec.day_of_week == 6;
  switch (filter) {
    case DayFilter::All: return true;
    case DayFilter::Weekday: return !weekend;
    case DayFilter::Weekend: return weekend;
  }
  return true;
}

inline std::vector<TripRecord> filter_by_day(const std::vector<TripRecord>& records,
                                             DayFilter filter) {
  std::vector<TripRecord> out;
  for (const auto& rec : records)
    if (matches_day_filter(rec, filter)) out.push_back(rec);
  return out;
}

// Bernoulli-sample in-window records into a demand stream; deterministic for a
// fixed (records, fraction, window, seed) tuple.
inline DemandStream sample_stream(const std::vector<TripRecord>& records,
                                  double demand_fraction, double window_start,
                                  double window_end, std::uint64_t seed) {
  if (!(demand_fraction > 0.0 && demand_fraction <= 1.0))
    throw ConfigError("sample_stream: demand_fraction must be in (0, 1]");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  DemandStream stream;
  stream.seed = seed;
  stream.demand_fraction = demand_fraction;
  for (const auto& rec : records) {
    const bool in_window = rec.pickup_time >= window_start && rec.pickup_time < window_end;
    if (!in_window) continue;
    // draw for every in-window record so inclusion of one record does not
    // shift the draws of the others' positions in the stream
    const double u = unif(rng);
    if (demand_fraction < 1.0 && u >= demand_fraction) continue;
    stream.requests.push_back({rec.pickup_time, rec.pickup, rec.dropoff});
  }
  std::stable_sort(stream.requests.begin(), stream.requests.end(),
                   [](const DemandRequest& a, const DemandRequest& b) {
                     return a.request_time < b.request_time;
                   });
  return stream;
}

// Synthetic per-zone homogeneous Poisson demand. rates are arrivals/hour;
// od_matrix rows give destination-zone fractions and must each sum to 1.
inline DemandStream synth_poisson(const std::vector<double>& rates_per_hour,
                                  const std::vector<std::vector<double>>& od_matrix,
                                  double window_start, double window_end,
                                  std::uint64_t seed, const ServiceRegion& region) {
  const int n = region.n_zones();
  if (static_cast<int>(rates_per_hour.size()) != n ||
      static_cast<int>(od_matrix.size()) != n)
    throw ConfigError("synth_poisson: rates/od must have one entry per zone");
  for (int i = 0; i < n; ++i) {
    if (rates_per_hour[i] < 0.0) throw ConfigError("synth_poisson: negative rate");
    if (static_cast<int>(od_matrix[i].size()) != n)
      throw ConfigError("synth_poisson: od row width mismatch");
    double sum = 0.0;
    for (double f : od_matrix[i]) {
      if (f < 0.0) throw ConfigError("synth_poisson: negative od fraction");
      sum += f;
    }
    if (std::fabs(sum - 1.0) > 1e-9)
      throw ConfigError("synth_poisson: od row " + std::to_string(i) + " does not sum to 1");
  }

  struct Tagged {
    DemandRequest req;
    int zone;
    int seq;
  };
  std::vector<Tagged> all;
  for (int i = 0; i < n; ++i) {
    const double lambda = rates_per_hour[i] / 3600.0;
    if (lambda <= 0.0) continue;
    std::mt19937_64 rng(mix_seed(seed, static_cast<std::uint64_t>(i)));
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const Rect& oz = region.zones[static_cast<std::size_t>(i)];
    double t = window_start;
    int seq = 0;
    for (;;) {
      t += -std::log(1.0 - unif(rng)) / lambda;
      if (t >= window_end) break;
      DemandRequest req;
      req.request_time = t;
      req.origin = {oz.min_x + unif(rng) * oz.width(), oz.min_y + unif(rng) * oz.height()};
      const double pick = unif(rng);
      double cum = 0.0;
      int j = n - 1;
      for (int k = 0; k < n; ++k) {
        cum += od_matrix[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)];
        if (pick < cum) {
          j = k;
          break;
        }
      }
      const Rect& dz = region.zones[static_cast<std::size_t>(j)];
      req.destination = {dz.min_x + unif(rng) * dz.width(), dz.min_y + unif(rng) * dz.height()};
      all.push_back({req, i, seq++});
    }
  }
  std::sort(all.begin(), all.end(), [](const Tagged& a, const Tagged& b) {
    if (a.req.request_time != b.req.request_time) return a.req.request_time < b.req.request_time;
    if (a.zone != b.zone) return a.zone < b.zone;
    return a.seq < b.seq;
  });
  DemandStream stream;
  stream.seed = seed;
  for (const auto& tagged : all) stream.requests.push_back(tagged.req);
  return stream;
}

// Per-zone, per-interval origin counts. Bucket b covers request times in
// [b * interval, (b + 1) * interval); summed over everything it conserves the
// stream length.
inline std::vector<std::vector<int>> zone_counts(const DemandStream& stream,
                                                 const ServiceRegion& region,
                                                 double interval,
                                                 double window_start = 0.0) {
  if (!(interval > 0.0)) throw ConfigError("zone_counts: interval must be positive");
  const int n = region.n_zones();
  std::vector<std::vector<int>> counts(static_cast<std::size_t>(n));
  for (const auto& req : stream.requests) {
    const int zone = zone_of(req.origin, region);
    const double rel = req.request_time - window_start;
    if (rel < 0.0) throw DataError("zone_counts: request before window start");
    const auto bucket = static_cast<std::size_t>(rel / interval);
    for (auto& zc : counts)
      if (zc.size() <= bucket) zc.resize(bucket + 1, 0);
    ++counts[static_cast<std::size_t>(zone)][bucket];
  }
  return counts;
}

// Replace geometric centroids with the demand-weighted mean origin per zone;
// zones without demand keep their geometric centroid.
inline void apply_demand_centroids(ServiceRegion& region, const DemandStream& stream) {
  const int n = region.n_zones();
  std::vector<double> sx(static_cast<std::size_t>(n), 0.0), sy(static_cast<std::size_t>(n), 0.0);
  std::vector<int> cnt(static_cast<std::size_t>(n), 0);
  for (const auto& req : stream.requests) {
    const auto zone = static_cast<std::size_t>(zone_of(req.origin, region));
    sx[zone] += req.origin.x;
    sy[zone] += req.origin.y;
    ++cnt[zone];
  }
  for (std::size_t i = 0; i < static_cast<std::size_t>(n); ++i) {
    if (cnt[i] > 0)
      region.centroids[i] = {sx[i] / cnt[i], sy[i] / cnt[i]};
  }
}

}  // namespace sams
