#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "sams/assignment.hpp"
#include "sams/common.hpp"
#include "sams/demand.hpp"
#include "sams/domain.hpp"
#include "sams/reposition.hpp"

namespace sams {

enum class PlacementMode { UniformRandom, DemandProportional };

struct SimConfig {
  double vehicle_speed = 5.0;       // m/s
  double dropoff_dwell = 15.0;      // s
  double pickup_dwell = 45.0;       // s
  double step = 15.0;               // s, the discretization delta
  int fleet_size = 600;
  double assignment_interval = 30.0;
  double repositioning_interval = 300.0;
  PlacementMode initial_placement = PlacementMode::UniformRandom;
  double assignment_alpha = -1.0;   // wait weight in S2 cost; <0 means vehicle_speed
};

inline void validate_config(const SimConfig& cfg) {
  if (!(cfg.step > 0.0)) throw ConfigError("sim config: step must be positive");
  if (!(cfg.vehicle_speed > 0.0)) throw ConfigError("sim config: vehicle_speed must be positive");
  if (cfg.fleet_size < 1) throw ConfigError("sim config: fleet_size must be >= 1");
  const auto multiple_of_step = [&](double d, const char* what) {
    if (!(d >= cfg.step - 1e-9)) throw ConfigError(std::string("sim config: ") + what +
                                                   " must be at least one step");
    const double k = d / cfg.step;
    if (std::fabs(k - std::round(k)) > 1e-9)
      throw ConfigError(std::string("sim config: ") + what + " must be a multiple of step");
  };
  multiple_of_step(cfg.dropoff_dwell, "dropoff_dwell");
  multiple_of_step(cfg.pickup_dwell, "pickup_dwell");
  multiple_of_step(cfg.assignment_interval, "assignment_interval");
  multiple_of_step(cfg.repositioning_interval, "repositioning_interval");
}

enum class EventKind {
  RequestArrival,
  Assignment,
  Pickup,
  Dropoff,
  RepositionStart,
  RepositionArrive,
  RepositionCancel,
};

inline const char* event_kind_name(EventKind k) {
  switch (k) {
    case EventKind::RequestArrival: return "request_arrival";
    case EventKind::Assignment: return "assignment";
    case EventKind::Pickup: return "pickup";
    case EventKind::Dropoff: return "dropoff";
    case EventKind::RepositionStart: return "reposition_start";
    case EventKind::RepositionArrive: return "reposition_arrive";
    case EventKind::RepositionCancel: return "reposition_cancel";
  }
  return "?";
}

struct SimEvent {
  double time = 0.0;
  EventKind kind = EventKind::RequestArrival;
  int request_id = -1;
  int vehicle_id = -1;
  Position position{};
};

struct SimWorld {
  Clock clock;
  ServiceRegion region;
  std::vector<Vehicle> vehicles;
  std::vector<Request> requests;  // stream order; Unrequested until activated
  std::size_t stream_cursor = 0;
  std::vector<SimEvent> events;
};

// Episode-level accounting shared by the reward identity and the metrics.
struct EpisodeTally {
  long activated = 0;        // n: requests that entered the system
  long served = 0;           // S
  long sum_wait_counts = 0;  // sum over steps of (waiting + served_delta)
  long sum_served_delta = 0;
};

struct EpisodeTrace {
  std::vector<MdpStepRecord> mdp;
  std::vector<SimEvent> events;
  std::vector<Request> final_requests;
  std::vector<Vehicle> final_vehicles;
  EpisodeTally tally;
  double delta = 0.0;
  double horizon_start = 0.0;
  double horizon_end = 0.0;
  double total_reward = 0.0;
};

using AssignmentFn = std::function<AssignmentResult(const AssignmentInstance&)>;
using RepositionPolicyFn = std::function<RepositionAction(const ZoneGraph&)>;

struct EpisodeParams {
  RewardWeights weights{};            // prices the MDP records; zero for baselines
  bool count_assigned_waiting = false;  // include Assigned requests in the wait term
  int q = 4;                          // trailing demand columns in the state
  int forecast_horizon_intervals = 0;  // >0 adds forecast columns (guided mode)
  bool check_invariants = false;       // per-step state-machine validation
  std::function<void(const SimWorld&)> step_hook;  // called after each step
};

inline SimWorld init_world(const SimConfig& cfg, const ServiceRegion& region,
                           const DemandStream& stream, double horizon_start,
                           double horizon_end, std::uint64_t seed) {
  validate_config(cfg);
  if (!(horizon_end > horizon_start)) throw ConfigError("init_world: empty horizon");

  SimWorld world;
  world.clock = Clock{horizon_start, horizon_start, cfg.step, horizon_end};
  world.region = region;

  world.requests.reserve(stream.requests.size());
  int rid = 0;
  for (const auto& d : stream.requests) {
    Request r;
    r.id = rid++;
    r.request_time = d.request_time;
    r.origin = d.origin;
    r.destination = d.destination;
    r.state = RequestState::Unrequested;
    world.requests.push_back(r);
  }

  std::mt19937_64 rng(mix_seed(seed, 7001));
  std::uniform_real_distribution<double> ux(region.bounds.min_x, region.bounds.max_x);
  std::uniform_real_distribution<double> uy(region.bounds.min_y, region.bounds.max_y);

  std::vector<int> zone_quota;
  if (cfg.initial_placement == PlacementMode::DemandProportional) {
    const int n = region.n_zones();
    std::vector<long> origin_counts(static_cast<std::size_t>(n), 0);
    long total = 0;
    for (const auto& d : stream.requests) {
      ++origin_counts[static_cast<std::size_t>(zone_of(d.origin, region))];
      ++total;
    }
    zone_quota.assign(static_cast<std::size_t>(n), 0);
    if (total > 0) {
      // largest-remainder apportionment of the fleet across zones
      std::vector<std::pair<double, int>> rema;
      int placed = 0;
      for (int z = 0; z < n; ++z) {
        const double exact = static_cast<double>(cfg.fleet_size) *
                             static_cast<double>(origin_counts[static_cast<std::size_t>(z)]) /
                             static_cast<double>(total);
        zone_quota[static_cast<std::size_t>(z)] = static_cast<int>(std::floor(exact));
        placed += zone_quota[static_cast<std::size_t>(z)];
        rema.emplace_back(exact - std::floor(exact), z);
      }
      std::sort(rema.begin(), rema.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
      });
      for (int k = 0; k < cfg.fleet_size - placed; ++k)
        ++zone_quota[static_cast<std::size_t>(rema[static_cast<std::size_t>(k)].second)];
    }
  }

  world.vehicles.reserve(static_cast<std::size_t>(cfg.fleet_size));
  int next_zone = 0;
  for (int vid = 0; vid < cfg.fleet_size; ++vid) {
    Vehicle v;
    v.id = vid;
    v.state = VehicleState::Idle;
    v.idle_since = horizon_start;
    if (!zone_quota.empty()) {
      while (next_zone < region.n_zones() &&
             zone_quota[static_cast<std::size_t>(next_zone)] == 0)
        ++next_zone;
      if (next_zone < region.n_zones()) {
        --zone_quota[static_cast<std::size_t>(next_zone)];
        const Rect& zr = region.zones[static_cast<std::size_t>(next_zone)];
        v.position = {std::uniform_real_distribution<double>(zr.min_x, zr.max_x)(rng),
                      std::uniform_real_distribution<double>(zr.min_y, zr.max_y)(rng)};
      } else {
        v.position = {ux(rng), uy(rng)};  // empty-demand fallback
      }
    } else {
      v.position = {ux(rng), uy(rng)};
    }
    world.vehicles.push_back(v);
  }
  return world;
}

namespace detail {

inline constexpr double kTimeEps = 1e-9;

struct StepOutcome {
  long served_delta = 0;
};

// Advances one vehicle through the continuous timeline of a single step:
// travel legs, dwells, and state flips all interleave inside [now, now+delta].
inline void move_vehicle(Vehicle& v, std::vector<Request>& requests, double now,
                         const SimConfig& cfg, std::vector<SimEvent>& out,
                         StepOutcome& outcome) {
  double local = 0.0;
  const double delta = cfg.step;
  while (v.state != VehicleState::Idle && local < delta - kTimeEps) {
    if (!v.task) throw InternalError("move_vehicle: active vehicle without task");
    VehicleTask& task = *v.task;

    if (task.dwell_until > now + local + kTimeEps) {
      // mid-dwell: jump to the dwell end or the step boundary
      const double dwell_end_local = task.dwell_until - now;
      if (dwell_end_local > delta + kTimeEps) break;  // still dwelling at step end
      local = dwell_end_local;
      const double t_flip = now + local;
      if (v.state == VehicleState::EnRoutePickup) {
        Request& r = requests[static_cast<std::size_t>(*task.request_id)];
        r.state = RequestState::InVehicle;
        v.state = VehicleState::EnRouteDropoff;
        task.target = r.destination;
        task.dwell_until = -1.0;
      } else if (v.state == VehicleState::EnRouteDropoff) {
        Request& r = requests[static_cast<std::size_t>(*task.request_id)];
        r.state = RequestState::Served;
        r.dropoff_time = t_flip;
        out.push_back({t_flip, EventKind::Dropoff, r.id, v.id, v.position});
        ++outcome.served_delta;
        v.state = VehicleState::Idle;
        v.idle_since = t_flip;
        v.task.reset();
      } else {
        throw InternalError("move_vehicle: dwell in a non-dwelling state");
      }
      continue;
    }

    const double dist = l1_distance(v.position, task.target);
    const double time_needed = dist / cfg.vehicle_speed;
    const double budget = delta - local;
    if (time_needed > budget + kTimeEps) {
      // partial leg: consume the rest of the step
      v.position = advance_along_l1(v.position, task.target, cfg.vehicle_speed, budget);
      const double moved = cfg.vehicle_speed * budget;
      if (v.state == VehicleState::EnRoutePickup) v.odometer_pickup += moved;
      else if (v.state == VehicleState::EnRouteDropoff) v.odometer_loaded += moved;
      else v.odometer_reposition += moved;
      local = delta;
      break;
    }

    // leg completes within the step
    v.position = task.target;
    local += time_needed;
    const double t_arr = now + local;
    if (v.state == VehicleState::EnRoutePickup) {
      v.odometer_pickup += dist;
      Request& r = requests[static_cast<std::size_t>(*task.request_id)];
      r.pickup_time = t_arr;  // wait clock stops here, before the dwell
      out.push_back({t_arr, EventKind::Pickup, r.id, v.id, v.position});
      task.dwell_until = t_arr + cfg.pickup_dwell;
    } else if (v.state == VehicleState::EnRouteDropoff) {
      v.odometer_loaded += dist;
      task.dwell_until = t_arr + cfg.dropoff_dwell;
    } else if (v.state == VehicleState::Repositioning) {
      v.odometer_reposition += dist;
      out.push_back({t_arr, EventKind::RepositionArrive, -1, v.id, v.position});
      v.state = VehicleState::Idle;
      v.idle_since = t_arr;
      v.task.reset();
    }
  }
}

inline void check_world_invariants(const SimWorld& world, int fleet_size) {
  if (static_cast<int>(world.vehicles.size()) != fleet_size)
    throw InternalError("invariant: fleet size changed");
  std::vector<char> matched(world.requests.size(), 0);
  for (const auto& v : world.vehicles) {
    const bool has_req = v.task && v.task->request_id.has_value();
    const bool has_zone = v.task && v.task->target_zone.has_value();
    switch (v.state) {
      case VehicleState::Idle:
        if (v.task) throw InternalError("invariant: idle vehicle with task");
        break;
      case VehicleState::EnRoutePickup:
      case VehicleState::EnRouteDropoff:
        if (!has_req) throw InternalError("invariant: serving vehicle without request");
        if (matched[static_cast<std::size_t>(*v.task->request_id)]++)
          throw InternalError("invariant: request matched to two vehicles");
        break;
      case VehicleState::Repositioning:
        if (!has_zone) throw InternalError("invariant: repositioning without target zone");
        break;
    }
    if (v.odometer_loaded < 0 || v.odometer_pickup < 0 || v.odometer_reposition < 0)
      throw InternalError("invariant: negative odometer");
  }
  for (std::size_t i = 0; i < world.requests.size(); ++i) {
    const Request& r = world.requests[i];
    const bool vehicle_bound = matched[i] != 0;
    switch (r.state) {
      case RequestState::Unrequested:
      case RequestState::Unassigned:
      case RequestState::Served:
        if (vehicle_bound) throw InternalError("invariant: unmatched-state request has vehicle");
        break;
      case RequestState::Assigned:
      case RequestState::InVehicle:
        if (!vehicle_bound) throw InternalError("invariant: matched-state request lacks vehicle");
        break;
    }
    if (r.state == RequestState::Served && (!r.pickup_time || !r.dropoff_time))
      throw InternalError("invariant: served request missing timestamps");
  }
}

}  // namespace detail

// Runs the fixed per-step pipeline: arrivals, assignment, repositioning,
// movement, accounting. Returns the completed trace.
inline EpisodeTrace run_episode(SimWorld& world, const SimConfig& cfg,
                                const AssignmentFn& assign_fn,
                                const RepositionPolicyFn& reposition_policy,
                                const EpisodeParams& params = {}) {
  validate_config(cfg);
  if (params.q <= 0) throw ConfigError("run_episode: q must be positive");
  const double alpha = cfg.assignment_alpha < 0.0 ? cfg.vehicle_speed : cfg.assignment_alpha;

  EpisodeTrace trace;
  trace.delta = cfg.step;
  trace.horizon_start = world.clock.start;
  trace.horizon_end = world.clock.horizon_end;

  DemandHistory history(world.region.n_zones());
  std::vector<long> interval_counts(static_cast<std::size_t>(world.region.n_zones()), 0);
  bool record_open = false;

  const auto close_record = [&] {
    if (!record_open) return;
    MdpStepRecord& rec = trace.mdp.back();
    rec.reward = -params.weights.omega * cfg.step * static_cast<double>(rec.sum_wait_counts) +
                 params.weights.sigma * static_cast<double>(rec.sum_served_delta);
    trace.total_reward += rec.reward;
    record_open = false;
  };

  while (!world.clock.finished()) {
    const double now = world.clock.now;
    std::vector<SimEvent> step_events;

    // (1) arrivals
    while (world.stream_cursor < world.requests.size() &&
           world.requests[world.stream_cursor].request_time <= now + detail::kTimeEps) {
      Request& r = world.requests[world.stream_cursor];
      r.state = RequestState::Unassigned;
      step_events.push_back({now, EventKind::RequestArrival, r.id, -1, r.origin});
      ++interval_counts[static_cast<std::size_t>(zone_of(r.origin, world.region))];
      ++trace.tally.activated;
      ++world.stream_cursor;
    }

    // (2) assignment
    if (world.clock.on_grid(cfg.assignment_interval) && assign_fn) {
      AssignmentInstance inst;
      inst.alpha = alpha;
      for (const auto& r : world.requests)
        if (r.state == RequestState::Unassigned)
          inst.requests.push_back({r.id, r.origin, now - r.request_time});
      for (const auto& v : world.vehicles)
        if (v.state == VehicleState::Idle || v.state == VehicleState::Repositioning)
          inst.vehicles.push_back({v.id, v.position});
      if (!inst.requests.empty() && !inst.vehicles.empty()) {
        const AssignmentResult result = assign_fn(inst);
        for (const auto& [req_id, veh_id] : result.matches) {
          Request& r = world.requests[static_cast<std::size_t>(req_id)];
          Vehicle& v = world.vehicles[static_cast<std::size_t>(veh_id)];
          if (r.state != RequestState::Unassigned)
            throw InternalError("assignment returned a non-waiting request");
          if (v.state == VehicleState::Repositioning)
            step_events.push_back({now, EventKind::RepositionCancel, -1, v.id, v.position});
          if (!legal_vehicle_transition(v.state, VehicleState::EnRoutePickup))
            throw InternalError("assignment: illegal vehicle transition");
          r.state = RequestState::Assigned;
          v.state = VehicleState::EnRoutePickup;
          v.task = VehicleTask{r.id, std::nullopt, r.origin, -1.0};
          step_events.push_back({now, EventKind::Assignment, r.id, v.id, v.position});
        }
      }
    }

    // (3) repositioning
    if (world.clock.on_grid(cfg.repositioning_interval)) {
      if (now > world.clock.start + detail::kTimeEps) {
        history.push(interval_counts);
        std::fill(interval_counts.begin(), interval_counts.end(), 0);
      }
      if (reposition_policy) {
        close_record();
        Tensor2 forecast;
        const Tensor2* forecast_ptr = nullptr;
        if (params.forecast_horizon_intervals > 0) {
          forecast = forecast_channel(history, params.forecast_horizon_intervals);
          forecast_ptr = &forecast;
        }
        ZoneGraph state = build_state(world.vehicles, world.requests, world.region,
                                      cfg.vehicle_speed, history, params.q, forecast_ptr);
        RepositionAction action = reposition_policy(state);
        const auto dispatches = action_to_dispatch(action, world.vehicles, world.region);
        for (const auto& [veh_id, zone] : dispatches) {
          Vehicle& v = world.vehicles[static_cast<std::size_t>(veh_id)];
          if (!legal_vehicle_transition(v.state, VehicleState::Repositioning))
            throw InternalError("reposition: illegal vehicle transition");
          v.state = VehicleState::Repositioning;
          v.task = VehicleTask{std::nullopt, zone,
                               world.region.centroids[static_cast<std::size_t>(zone)], -1.0};
          step_events.push_back({now, EventKind::RepositionStart, -1, v.id, v.position});
        }
        MdpStepRecord rec;
        rec.time = now;
        rec.state = std::move(state);
        rec.action = std::move(action);
        trace.mdp.push_back(std::move(rec));
        record_open = true;
      }
    }

    // (4)+(5) movement with odometer accrual
    detail::StepOutcome outcome;
    for (auto& v : world.vehicles)
      detail::move_vehicle(v, world.requests, now, cfg, step_events, outcome);

    // end-of-step reward accounting on the post-transition state
    long waiting = 0;
    for (const auto& r : world.requests) {
      if (r.state == RequestState::Unassigned) ++waiting;
      else if (params.count_assigned_waiting && r.state == RequestState::Assigned) ++waiting;
    }
    trace.tally.sum_wait_counts += waiting + outcome.served_delta;
    trace.tally.sum_served_delta += outcome.served_delta;
    trace.tally.served += outcome.served_delta;
    if (record_open) {
      trace.mdp.back().sum_wait_counts += waiting + outcome.served_delta;
      trace.mdp.back().sum_served_delta += outcome.served_delta;
    }

    // (6) clock + events
    std::stable_sort(step_events.begin(), step_events.end(),
                     [](const SimEvent& a, const SimEvent& b) { return a.time < b.time; });
    world.events.insert(world.events.end(), step_events.begin(), step_events.end());
    if (params.step_hook) params.step_hook(world);
    world.clock.advance();
    if (params.check_invariants) detail::check_world_invariants(world, cfg.fleet_size);
  }

  close_record();
  trace.events = world.events;
  trace.final_requests = world.requests;
  trace.final_vehicles = world.vehicles;
  return trace;
}

// Canonical strategy functors.
inline AssignmentFn make_s1_strategy() {
  return [](const AssignmentInstance& inst) { return assign_s1(inst); };
}
inline AssignmentFn make_s2_strategy() {
  return [](const AssignmentInstance& inst) { return assign_s2(inst); };
}

}  // namespace sams
