#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "sams/common.hpp"
#include "sams/domain.hpp"
#include "sams/numerics.hpp"
#include "sams/sim.hpp"

namespace sams {

struct ServiceMetrics {
  std::optional<double> mean_wait;  // absent when nothing was served
  std::optional<double> std_wait;   // population standard deviation
  long served_count = 0;
  long unserved_count = 0;  // activated but not yet served at horizon end
  double pct_empty_distance = 0.0;
  double pct_empty_pickup = 0.0;
  double pct_empty_reposition = 0.0;
  double total_distance = 0.0;  // meters, loaded + pickup + reposition
  std::vector<std::vector<double>> per_zone_wait;  // waits grouped by pickup zone
};

inline ServiceMetrics compute_metrics(const EpisodeTrace& trace, const ServiceRegion& region) {
  ServiceMetrics m;
  m.per_zone_wait.assign(static_cast<std::size_t>(region.n_zones()), {});

  std::vector<double> waits;
  for (const auto& r : trace.final_requests) {
    if (r.state == RequestState::Unrequested) continue;
    if (r.state == RequestState::Served) {
      if (!r.pickup_time) throw InternalError("metrics: served request without pickup time");
      const double w = *r.pickup_time - r.request_time;
      waits.push_back(w);
      m.per_zone_wait[static_cast<std::size_t>(zone_of(r.origin, region))].push_back(w);
      ++m.served_count;
    } else {
      ++m.unserved_count;
    }
  }

  if (!waits.empty()) {
    double sum = 0.0;
    for (double w : waits) sum += w;
    const double mean = sum / static_cast<double>(waits.size());
    double ss = 0.0;
    for (double w : waits) ss += (w - mean) * (w - mean);
    m.mean_wait = mean;
    m.std_wait = std::sqrt(ss / static_cast<double>(waits.size()));
  }

  double loaded = 0.0, pickup = 0.0, reposition = 0.0;
  for (const auto& v : trace.final_vehicles) {
    loaded += v.odometer_loaded;
    pickup += v.odometer_pickup;
    reposition += v.odometer_reposition;
  }
  m.total_distance = loaded + pickup + reposition;
  if (m.total_distance > 0.0) {
    m.pct_empty_pickup = pickup / m.total_distance;
    m.pct_empty_reposition = reposition / m.total_distance;
    // summing the two shares keeps the decomposition identity bit-exact
    m.pct_empty_distance = m.pct_empty_pickup + m.pct_empty_reposition;
  }
  return m;
}

namespace detail {

inline std::string fmt_double(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", x);
  return buf;
}

inline std::vector<double> all_waits(const ServiceMetrics& m) {
  std::vector<double> waits;
  for (const auto& zone : m.per_zone_wait)
    waits.insert(waits.end(), zone.begin(), zone.end());
  return waits;
}

inline std::optional<double> zone_mean(const std::vector<double>& w) {
  if (w.empty()) return std::nullopt;
  double s = 0.0;
  for (double x : w) s += x;
  return s / static_cast<double>(w.size());
}

}  // namespace detail

enum class ReportFormat { Csv, Json };

// Schema-stable report. Metric keys track the published table rows; waits get
// quintile breakpoints and per-pickup-zone means. Absent values are NA / null.
inline std::string emit_report(const ServiceMetrics& m, ReportFormat format) {
  const std::vector<double> waits = detail::all_waits(m);
  std::vector<double> breaks;
  if (!waits.empty()) breaks = quintile_breakpoints(waits);

  if (format == ReportFormat::Json) {
    nlohmann::ordered_json j;
    j["mean_request_wait_seconds"] =
        m.mean_wait ? nlohmann::json(*m.mean_wait) : nlohmann::json(nullptr);
    j["std_request_wait_seconds"] =
        m.std_wait ? nlohmann::json(*m.std_wait) : nlohmann::json(nullptr);
    j["served_count"] = m.served_count;
    j["unserved_count"] = m.unserved_count;
    j["percent_empty_distance"] = m.pct_empty_distance;
    j["percent_empty_pickup"] = m.pct_empty_pickup;
    j["percent_empty_reposition"] = m.pct_empty_reposition;
    j["total_distance_m"] = m.total_distance;
    if (breaks.empty()) {
      j["wait_quintile_breakpoints"] = nlohmann::json(nullptr);
    } else {
      j["wait_quintile_breakpoints"] = breaks;
    }
    nlohmann::ordered_json zones = nlohmann::ordered_json::array();
    for (const auto& zone : m.per_zone_wait) {
      const auto mean = detail::zone_mean(zone);
      nlohmann::ordered_json z;
      z["count"] = zone.size();
      z["mean_wait"] = mean ? nlohmann::json(*mean) : nlohmann::json(nullptr);
      zones.push_back(z);
    }
    j["per_zone"] = zones;
    return j.dump(2) + "\n";
  }

  std::ostringstream os;
  os << "metric,value\n";
  const auto row = [&os](const std::string& key, const std::optional<double>& v) {
    os << key << "," << (v ? detail::fmt_double(*v) : std::string("NA")) << "\n";
  };
  row("mean_request_wait_seconds", m.mean_wait);
  row("std_request_wait_seconds", m.std_wait);
  os << "served_count," << m.served_count << "\n";
  os << "unserved_count," << m.unserved_count << "\n";
  row("percent_empty_distance", m.pct_empty_distance);
  row("percent_empty_pickup", m.pct_empty_pickup);
  row("percent_empty_reposition", m.pct_empty_reposition);
  row("total_distance_m", m.total_distance);
  static const char* kQuintileKeys[4] = {"wait_quintile_q20", "wait_quintile_q40",
                                         "wait_quintile_q60", "wait_quintile_q80"};
  for (int k = 0; k < 4; ++k)
    row(kQuintileKeys[k],
        breaks.empty() ? std::nullopt : std::optional<double>(breaks[static_cast<std::size_t>(k)]));
  for (std::size_t z = 0; z < m.per_zone_wait.size(); ++z) {
    os << "zone_" << z << "_served," << m.per_zone_wait[z].size() << "\n";
    row("zone_" + std::to_string(z) + "_mean_wait", detail::zone_mean(m.per_zone_wait[z]));
  }
  return os.str();
}

inline void write_report(const ServiceMetrics& m, ReportFormat format, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("report: cannot open " + path + " for writing");
  os << emit_report(m, format);
  if (!os) throw DataError("report: write failed for " + path);
}

// Round-trip companion for the JSON report (scalar fields and zone means).
struct ParsedReport {
  std::optional<double> mean_wait, std_wait;
  long served_count = 0, unserved_count = 0;
  double pct_empty_distance = 0, pct_empty_pickup = 0, pct_empty_reposition = 0;
  double total_distance = 0;
  std::vector<std::optional<double>> zone_mean_wait;
};

inline ParsedReport parse_report_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("report: bad JSON: ") + e.what());
  }
  ParsedReport p;
  const auto opt = [&](const char* key) -> std::optional<double> {
    if (j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<double>();
  };
  p.mean_wait = opt("mean_request_wait_seconds");
  p.std_wait = opt("std_request_wait_seconds");
  p.served_count = j.at("served_count").get<long>();
  p.unserved_count = j.at("unserved_count").get<long>();
  p.pct_empty_distance = j.at("percent_empty_distance").get<double>();
  p.pct_empty_pickup = j.at("percent_empty_pickup").get<double>();
  p.pct_empty_reposition = j.at("percent_empty_reposition").get<double>();
  p.total_distance = j.at("total_distance_m").get<double>();
  for (const auto& z : j.at("per_zone")) {
    if (z.at("mean_wait").is_null()) p.zone_mean_wait.push_back(std::nullopt);
    else p.zone_mean_wait.push_back(z.at("mean_wait").get<double>());
  }
  return p;
}

// ---- Zone heatmap (quintile-classed SVG grid) ----

inline constexpr const char* kHeatPalette[5] = {"#fee5d9", "#fcae91", "#fb6a4a",
                                                "#de2d26", "#a50f15"};
inline constexpr const char* kHeatAbsent = "#cccccc";

inline int quintile_class(double value, const std::vector<double>& breaks) {
  int k = 0;
  while (k < 4 && value > breaks[static_cast<std::size_t>(k)]) ++k;
  return k;
}

// Deterministic bytes: fixed formatting, fixed element order, no timestamps.
inline std::string emit_zone_heatmap(const std::vector<std::optional<double>>& per_zone,
                                     const ServiceRegion& region) {
  if (per_zone.size() != static_cast<std::size_t>(region.n_zones()))
    throw ConfigError("heatmap: one value slot per zone required");

  std::vector<double> present;
  for (const auto& v : per_zone)
    if (v) present.push_back(*v);
  std::vector<double> breaks(4, 0.0);
  if (!present.empty()) breaks = quintile_breakpoints(present);

  const double w = region.bounds.width();
  const double h = region.bounds.height();
  const double grid_w = 640.0;
  const double grid_h = grid_w * (h / w);
  const double legend_w = 220.0;
  const double sx = grid_w / w;
  const double sy = grid_h / h;

  char buf[256];
  std::string svg;
  std::snprintf(buf, sizeof(buf),
                "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 %.2f %.2f\">\n",
                grid_w + legend_w, std::max(grid_h, 150.0));
  svg += buf;

  for (int z = 0; z < region.n_zones(); ++z) {
    const Rect& r = region.zones[static_cast<std::size_t>(z)];
    const double x = (r.min_x - region.bounds.min_x) * sx;
    const double y = (region.bounds.max_y - r.max_y) * sy;  // flip: north up
    const double rw = r.width() * sx;
    const double rh = r.height() * sy;
    const auto& v = per_zone[static_cast<std::size_t>(z)];
    const char* fill = v ? kHeatPalette[quintile_class(*v, breaks)] : kHeatAbsent;
    std::snprintf(buf, sizeof(buf),
                  "  <rect x=\"%.2f\" y=\"%.2f\" width=\"%.2f\" height=\"%.2f\" "
                  "fill=\"%s\" stroke=\"#333333\" stroke-width=\"1\"/>\n",
                  x, y, rw, rh, fill);
    svg += buf;
    std::snprintf(buf, sizeof(buf),
                  "  <text x=\"%.2f\" y=\"%.2f\" font-size=\"12\" fill=\"#000000\">%d</text>\n",
                  x + 4.0, y + 14.0, z);
    svg += buf;
  }

  // legend: class swatches with breakpoint ranges
  const double lx = grid_w + 20.0;
  for (int k = 0; k < 5; ++k) {
    const double ly = 20.0 + 26.0 * k;
    std::snprintf(buf, sizeof(buf),
                  "  <rect x=\"%.2f\" y=\"%.2f\" width=\"18\" height=\"18\" fill=\"%s\" "
                  "stroke=\"#333333\" stroke-width=\"1\"/>\n",
                  lx, ly, kHeatPalette[k]);
    svg += buf;
    std::string label;
    if (present.empty()) {
      label = "n/a";
    } else if (k == 0) {
      label = "<= " + detail::fmt_double(breaks[0]);
    } else if (k == 4) {
      label = "> " + detail::fmt_double(breaks[3]);
    } else {
      label = detail::fmt_double(breaks[static_cast<std::size_t>(k - 1)]) + " - " +
              detail::fmt_double(breaks[static_cast<std::size_t>(k)]);
    }
    std::snprintf(buf, sizeof(buf),
                  "  <text x=\"%.2f\" y=\"%.2f\" font-size=\"12\" fill=\"#000000\">%s</text>\n",
                  lx + 26.0, ly + 14.0, label.c_str());
    svg += buf;
  }
  svg += "</svg>\n";
  return svg;
}

inline void write_zone_heatmap(const std::vector<std::optional<double>>& per_zone,
                               const ServiceRegion& region, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("heatmap: cannot open " + path + " for writing");
  os << emit_zone_heatmap(per_zone, region);
  if (!os) throw DataError("heatmap: write failed for " + path);
}

}  // namespace sams
