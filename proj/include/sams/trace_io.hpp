#pragma once

#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "sams/assignment.hpp"
#include "sams/common.hpp"
#include "sams/demand.hpp"
#include "sams/domain.hpp"
#include "sams/metrics.hpp"
#include "sams/sim.hpp"

namespace sams {

inline constexpr int kTraceFormatVersion = 1;

namespace detail {

inline nlohmann::ordered_json region_to_json(const ServiceRegion& region) {
  nlohmann::ordered_json j;
  j["bounds"] = {region.bounds.min_x, region.bounds.min_y, region.bounds.max_x, region.bounds.max_y};
  nlohmann::ordered_json zones = nlohmann::ordered_json::array();
  for (const auto& z : region.zones) zones.push_back({z.min_x, z.min_y, z.max_x, z.max_y});
  j["zones"] = zones;
  nlohmann::ordered_json cents = nlohmann::ordered_json::array();
  for (const auto& c : region.centroids) cents.push_back({c.x, c.y});
  j["centroids"] = cents;
  return j;
}

inline ServiceRegion region_from_json(const nlohmann::json& j) {
  ServiceRegion region;
  const auto& b = j.at("bounds");
  region.bounds = Rect{b.at(0).get<double>(), b.at(1).get<double>(), b.at(2).get<double>(),
                       b.at(3).get<double>()};
  for (const auto& z : j.at("zones"))
    region.zones.push_back(Rect{z.at(0).get<double>(), z.at(1).get<double>(),
                                z.at(2).get<double>(), z.at(3).get<double>()});
  for (const auto& c : j.at("centroids"))
    region.centroids.push_back(Position{c.at(0).get<double>(), c.at(1).get<double>()});
  if (region.zones.size() != region.centroids.size() || region.zones.empty())
    throw DataError("region: zones/centroids mismatch");
  return region;
}

inline nlohmann::ordered_json tensor_to_json(const Tensor2& t) {
  nlohmann::ordered_json j;
  j["rows"] = t.rows;
  j["cols"] = t.cols;
  j["values"] = t.v;
  return j;
}

inline Tensor2 tensor_from_json(const nlohmann::json& j) {
  Tensor2 t(j.at("rows").get<int>(), j.at("cols").get<int>());
  const auto& vals = j.at("values");
  if (vals.size() != t.size()) throw DataError("tensor: value count mismatch");
  for (std::size_t k = 0; k < t.size(); ++k) t.v[k] = vals.at(k).get<double>();
  return t;
}

}  // namespace detail

// ---- Episode trace (JSON, self-contained: includes the region) ----

inline std::string trace_to_json(const EpisodeTrace& trace, const ServiceRegion& region) {
  nlohmann::ordered_json j;
  j["format_version"] = kTraceFormatVersion;
  j["delta"] = trace.delta;
  j["horizon"] = {trace.horizon_start, trace.horizon_end};
  j["total_reward"] = trace.total_reward;
  j["tally"] = {{"activated", trace.tally.activated},
                {"served", trace.tally.served},
                {"sum_wait_counts", trace.tally.sum_wait_counts},
                {"sum_served_delta", trace.tally.sum_served_delta}};
  j["region"] = detail::region_to_json(region);

  nlohmann::ordered_json mdp = nlohmann::ordered_json::array();
  for (const auto& rec : trace.mdp) {
    nlohmann::ordered_json r;
    r["time"] = rec.time;
    r["reward"] = rec.reward;
    r["sum_wait_counts"] = rec.sum_wait_counts;
    r["sum_served_delta"] = rec.sum_served_delta;
    r["features"] = detail::tensor_to_json(rec.state.node_features);
    r["q"] = rec.state.q;
    r["action"] = detail::tensor_to_json(rec.action.a);
    mdp.push_back(std::move(r));
  }
  j["mdp"] = std::move(mdp);
  if (!trace.mdp.empty())
    j["adjacency"] = detail::tensor_to_json(trace.mdp.front().state.adjacency);

  nlohmann::ordered_json reqs = nlohmann::ordered_json::array();
  for (const auto& r : trace.final_requests) {
    nlohmann::ordered_json q;
    q["id"] = r.id;
    q["t"] = r.request_time;
    q["o"] = {r.origin.x, r.origin.y};
    q["d"] = {r.destination.x, r.destination.y};
    q["state"] = static_cast<int>(r.state);
    q["pickup"] = r.pickup_time ? nlohmann::json(*r.pickup_time) : nlohmann::json(nullptr);
    q["dropoff"] = r.dropoff_time ? nlohmann::json(*r.dropoff_time) : nlohmann::json(nullptr);
    reqs.push_back(std::move(q));
  }
  j["requests"] = std::move(reqs);

  nlohmann::ordered_json vehs = nlohmann::ordered_json::array();
  for (const auto& v : trace.final_vehicles) {
    nlohmann::ordered_json q;
    q["id"] = v.id;
    q["pos"] = {v.position.x, v.position.y};
    q["state"] = static_cast<int>(v.state);
    q["od_loaded"] = v.odometer_loaded;
    q["od_pickup"] = v.odometer_pickup;
    q["od_reposition"] = v.odometer_reposition;
    vehs.push_back(std::move(q));
  }
  j["vehicles"] = std::move(vehs);
  return j.dump(1) + "\n";
}

struct LoadedTrace {
  EpisodeTrace trace;
  ServiceRegion region;
};

inline LoadedTrace trace_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("trace: bad JSON: ") + e.what());
  }
  if (!j.contains("format_version") || j.at("format_version").get<int>() != kTraceFormatVersion)
    throw DataError("trace: unsupported format version");

  LoadedTrace out;
  out.region = detail::region_from_json(j.at("region"));
  EpisodeTrace& t = out.trace;
  t.delta = j.at("delta").get<double>();
  t.horizon_start = j.at("horizon").at(0).get<double>();
  t.horizon_end = j.at("horizon").at(1).get<double>();
  t.total_reward = j.at("total_reward").get<double>();
  t.tally.activated = j.at("tally").at("activated").get<long>();
  t.tally.served = j.at("tally").at("served").get<long>();
  t.tally.sum_wait_counts = j.at("tally").at("sum_wait_counts").get<long>();
  t.tally.sum_served_delta = j.at("tally").at("sum_served_delta").get<long>();

  Tensor2 adjacency;
  if (j.contains("adjacency")) adjacency = detail::tensor_from_json(j.at("adjacency"));
  for (const auto& r : j.at("mdp")) {
    MdpStepRecord rec;
    rec.time = r.at("time").get<double>();
    rec.reward = r.at("reward").get<double>();
    rec.sum_wait_counts = r.at("sum_wait_counts").get<long>();
    rec.sum_served_delta = r.at("sum_served_delta").get<long>();
    rec.state.node_features = detail::tensor_from_json(r.at("features"));
    rec.state.q = r.at("q").get<int>();
    rec.state.n_zones = rec.state.node_features.rows;
    rec.state.adjacency = adjacency;
    rec.action.a = detail::tensor_from_json(r.at("action"));
    t.mdp.push_back(std::move(rec));
  }

  for (const auto& q : j.at("requests")) {
    Request r;
    r.id = q.at("id").get<int>();
    r.request_time = q.at("t").get<double>();
    r.origin = {q.at("o").at(0).get<double>(), q.at("o").at(1).get<double>()};
    r.destination = {q.at("d").at(0).get<double>(), q.at("d").at(1).get<double>()};
    r.state = static_cast<RequestState>(q.at("state").get<int>());
    if (!q.at("pickup").is_null()) r.pickup_time = q.at("pickup").get<double>();
    if (!q.at("dropoff").is_null()) r.dropoff_time = q.at("dropoff").get<double>();
    t.final_requests.push_back(r);
  }
  for (const auto& q : j.at("vehicles")) {
    Vehicle v;
    v.id = q.at("id").get<int>();
    v.position = {q.at("pos").at(0).get<double>(), q.at("pos").at(1).get<double>()};
    v.state = static_cast<VehicleState>(q.at("state").get<int>());
    v.odometer_loaded = q.at("od_loaded").get<double>();
    v.odometer_pickup = q.at("od_pickup").get<double>();
    v.odometer_reposition = q.at("od_reposition").get<double>();
    t.final_vehicles.push_back(v);
  }
  return out;
}

inline void write_trace(const EpisodeTrace& trace, const ServiceRegion& region,
                        const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("trace: cannot open " + path + " for writing");
  os << trace_to_json(trace, region);
  if (!os) throw DataError("trace: write failed for " + path);
}

inline LoadedTrace load_trace(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("trace: cannot open " + path);
  std::ostringstream buf;
  buf << is.rdbuf();
  return trace_from_json(buf.str());
}

// ---- Event log (JSON lines) ----

inline std::string events_to_jsonl(const std::vector<SimEvent>& events) {
  std::string out;
  for (const auto& e : events) {
    nlohmann::ordered_json j;
    j["time"] = e.time;
    j["kind"] = event_kind_name(e.kind);
    j["request"] = e.request_id;
    j["vehicle"] = e.vehicle_id;
    j["pos"] = {e.position.x, e.position.y};
    out += j.dump();
    out += "\n";
  }
  return out;
}

inline void write_events(const std::vector<SimEvent>& events, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("events: cannot open " + path + " for writing");
  os << events_to_jsonl(events);
  if (!os) throw DataError("events: write failed for " + path);
}

// ---- Assignment instance / result (for offline replay) ----

inline AssignmentInstance instance_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("instance: bad JSON: ") + e.what());
  }
  AssignmentInstance inst;
  inst.alpha = j.value("alpha", 0.0);
  for (const auto& r : j.at("requests"))
    inst.requests.push_back({r.at("id").get<int>(),
                             Position{r.at("x").get<double>(), r.at("y").get<double>()},
                             r.value("wait", 0.0)});
  for (const auto& v : j.at("vehicles"))
    inst.vehicles.push_back(
        {v.at("id").get<int>(), Position{v.at("x").get<double>(), v.at("y").get<double>()}});
  return inst;
}

inline std::string result_to_json(const AssignmentResult& result) {
  nlohmann::ordered_json j;
  nlohmann::ordered_json matches = nlohmann::ordered_json::array();
  for (const auto& [r, v] : result.matches) matches.push_back({r, v});
  j["matches"] = std::move(matches);
  j["objective"] = result.objective_value;
  return j.dump(1) + "\n";
}

// ---- Normalized trip store (CSV written by ingest, read by scenarios) ----

inline void write_trip_store(const std::vector<TripRecord>& trips, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("store: cannot open " + path + " for writing");
  os << "time,origin_x,origin_y,dest_x,dest_y,day_of_week\n";
  char buf[256];
  for (const auto& t : trips) {
    std::snprintf(buf, sizeof(buf), "%.3f,%.3f,%.3f,%.3f,%.3f,%d\n", t.pickup_time,
                  t.pickup.x, t.pickup.y, t.dropoff.x, t.dropoff.y, t.day_of_week);
    os << buf;
  }
  if (!os) throw DataError("store: write failed for " + path);
}

inline std::vector<TripRecord> load_trip_store(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("store: cannot open " + path);
  std::string line;
  if (!std::getline(is, line) || line.rfind("time,", 0) != 0)
    throw DataError("store: missing header in " + path);
  std::vector<TripRecord> trips;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto fields = detail::split_csv_line(line);
    if (fields.size() != 6) throw DataError("store: malformed row in " + path);
    try {
      TripRecord t;
      t.pickup_time = std::stod(fields[0]);
      t.dropoff_time = t.pickup_time;
      t.pickup = {std::stod(fields[1]), std::stod(fields[2])};
      t.dropoff = {std::stod(fields[3]), std::stod(fields[4])};
      t.trip_distance_km = 1.0;
      t.day_of_week = std::stoi(fields[5]);
      trips.push_back(t);
    } catch (const std::exception&) {
      throw DataError("store: unparsable row in " + path);
    }
  }
  return trips;
}

}  // namespace sams
