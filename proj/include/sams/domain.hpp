#pragma once

#include <cassert>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sams/common.hpp"

namespace sams {

struct Position {
  double x = 0.0;  // meters east of the region origin
  double y = 0.0;  // meters north of the region origin
};

inline double l1_distance(const Position& a, const Position& b) {
  return std::fabs(a.x - b.x) + std::fabs(a.y - b.y);
}

// Request lifecycle codes; ordinal value is monotone non-decreasing over time.
enum class RequestState : int {
  Unrequested = 0,
  Unassigned = 1,
  Assigned = 2,
  InVehicle = 3,
  Served = 4,
};

struct Request {
  int id = -1;
  double request_time = 0.0;
  Position origin{};
  Position destination{};
  RequestState state = RequestState::Unrequested;
  std::optional<double> pickup_time;   // instant the vehicle reached the origin
  std::optional<double> dropoff_time;  // instant the vehicle reached the destination
};

enum class VehicleState : int {
  Idle = 1,
  EnRoutePickup = 2,
  EnRouteDropoff = 3,
  Repositioning = 4,
};

// Legal consecutive-step transitions: {Idle,Repositioning} -> {Idle,EnRoutePickup,
// Repositioning}; EnRoutePickup -> {EnRoutePickup,EnRouteDropoff};
// EnRouteDropoff -> {EnRouteDropoff,Idle}.
inline bool legal_vehicle_transition(VehicleState from, VehicleState to) {
  switch (from) {
    case VehicleState::Idle:
    case VehicleState::Repositioning:
      return to == VehicleState::Idle || to == VehicleState::EnRoutePickup ||
             to == VehicleState::Repositioning;
    case VehicleState::EnRoutePickup:
      return to == VehicleState::EnRoutePickup || to == VehicleState::EnRouteDropoff;
    case VehicleState::EnRouteDropoff:
      return to == VehicleState::EnRouteDropoff || to == VehicleState::Idle;
  }
  return false;
}

// Current task payload; present iff the vehicle is not idle.
struct VehicleTask {
  std::optional<int> request_id;   // set on pickup/dropoff legs
  std::optional<int> target_zone;  // set while repositioning
  Position target{};               // waypoint of the active leg
  double dwell_until = 0.0;        // absolute time; > now while boarding/alighting
};

struct Vehicle {
  int id = -1;
  Position position{};
  VehicleState state = VehicleState::Idle;
  std::optional<VehicleTask> task;
  double odometer_loaded = 0.0;      // meters with a passenger aboard
  double odometer_pickup = 0.0;      // meters en route to a pickup
  double odometer_reposition = 0.0;  // meters repositioning empty
  double idle_since = 0.0;           // time the vehicle last became idle
};

struct Rect {
  double min_x = 0.0, min_y = 0.0, max_x = 0.0, max_y = 0.0;

  bool contains(const Position& p) const {
    return p.x >= min_x && p.x <= max_x && p.y >= min_y && p.y <= max_y;
  }
  double width() const { return max_x - min_x; }
  double height() const { return max_y - min_y; }
  Position center() const { return {0.5 * (min_x + max_x), 0.5 * (min_y + max_y)}; }
};

// Service region partitioned into rectangular zones. Zones are stored in index
// order; zone_of resolves boundary points to the lowest containing index.
struct ServiceRegion {
  Rect bounds{};
  std::vector<Rect> zones;
  std::vector<Position> centroids;

  int n_zones() const { return static_cast<int>(zones.size()); }
};

// Uniform nx-by-ny grid over a width-by-height rectangle, geometric centroids.
// Zone index is row-major: index = row * nx + col, rows counted from y = 0.
inline ServiceRegion make_grid_region(double width, double height, int nx, int ny) {
  if (width <= 0 || height <= 0 || nx < 1 || ny < 1)
    throw ConfigError("make_grid_region: invalid grid spec");
  ServiceRegion region;
  region.bounds = {0.0, 0.0, width, height};
  const double cw = width / nx, ch = height / ny;
  for (int row = 0; row < ny; ++row) {
    for (int col = 0; col < nx; ++col) {
      Rect z{col * cw, row * ch, (col + 1) * cw, (row + 1) * ch};
      region.zones.push_back(z);
      region.centroids.push_back(z.center());
    }
  }
  return region;
}

inline int zone_of(const Position& p, const ServiceRegion& region) {
  if (!region.bounds.contains(p))
    throw OutOfRegionError("zone_of: position (" + std::to_string(p.x) + ", " +
                           std::to_string(p.y) + ") outside service region");
  for (int i = 0; i < region.n_zones(); ++i) {
    if (region.zones[i].contains(p)) return i;
  }
  throw InternalError("zone_of: zones do not cover the region rectangle");
}

// Manhattan-grid travel time between two points at constant speed.
inline double travel_time(const Position& a, const Position& b, double speed) {
  if (!(speed > 0.0)) throw ConfigError("travel_time: speed must be positive");
  return l1_distance(a, b) / speed;
}

// Advance along an L1 path with a fixed x-then-y leg order. Travels exactly
// min(speed * dt, remaining L1 distance) meters; reaching the target returns
// it bit-exactly.
inline Position advance_along_l1(const Position& from, const Position& to,
                                 double speed, double dt) {
  assert(dt >= 0.0 && speed > 0.0);
  double budget = speed * dt;
  if (budget >= l1_distance(from, to)) return to;
  Position p = from;
  const double dx = std::fabs(to.x - p.x);
  const double step_x = std::min(budget, dx);
  p.x += (to.x > p.x ? step_x : -step_x);
  budget -= step_x;
  if (budget > 0.0) {
    const double dy = std::fabs(to.y - p.y);
    const double step_y = std::min(budget, dy);
    p.y += (to.y > p.y ? step_y : -step_y);
  }
  return p;
}

// Discrete simulation clock; now advances only by whole steps.
struct Clock {
  double start = 0.0;
  double now = 0.0;
  double step = 15.0;
  double horizon_end = 0.0;

  std::int64_t step_index() const {
    return static_cast<std::int64_t>(std::llround((now - start) / step));
  }
  // True when now sits on the grid of the given interval, anchored at start.
  bool on_grid(double interval) const {
    const auto every = static_cast<std::int64_t>(std::llround(interval / step));
    return every > 0 && step_index() % every == 0;
  }
  void advance() { now = start + (step_index() + 1) * step; }
  bool finished() const { return now >= horizon_end; }
};

}  // namespace sams
