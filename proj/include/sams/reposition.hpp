#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <unordered_map>
#include <utility>
#include <vector>

#include "sams/common.hpp"
#include "sams/diffnet.hpp"
#include "sams/domain.hpp"

namespace sams {

// Zone-level observation: node features N(t) plus the centroid travel-time
// adjacency M. Counts are kept raw here; scaling happens at the net boundary.
struct ZoneGraph {
  int n_zones = 0;
  int q = 0;  // number of trailing demand columns
  Tensor2 node_features;  // n x (3 + q [+ forecast columns])
  Tensor2 adjacency;      // n x n centroid-to-centroid travel seconds
};

struct RepositionAction {
  Tensor2 a;  // n x n, row-stochastic
};

struct RewardWeights {
  double omega = 0.0;
  double sigma = 0.0;
};

struct RewardCounts {
  long waiting = 0;       // passengers still waiting this sim step
  long served_delta = 0;  // passengers whose trip completed this sim step
};

// One repositioning decision with everything needed to recompute its reward.
struct MdpStepRecord {
  double time = 0.0;
  ZoneGraph state;
  RepositionAction action;
  double reward = 0.0;
  long sum_wait_counts = 0;   // sum over the window of (waiting + served_delta)
  long sum_served_delta = 0;  // sum over the window of served_delta
};

inline Tensor2 make_adjacency(const ServiceRegion& region, double vehicle_speed) {
  const int n = region.n_zones();
  Tensor2 m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      m.at(i, j) = i == j ? 0.0
                          : travel_time(region.centroids[static_cast<std::size_t>(i)],
                                        region.centroids[static_cast<std::size_t>(j)],
                                        vehicle_speed);
  return m;
}

inline void validate_action(const RepositionAction& action, int n_zones) {
  if (action.a.rows != n_zones || action.a.cols != n_zones)
    throw ConfigError("reposition action: wrong shape");
  for (int i = 0; i < n_zones; ++i) {
    double row = 0.0;
    for (int j = 0; j < n_zones; ++j) {
      const double x = action.a.at(i, j);
      if (!(x >= -1e-12 && x <= 1.0 + 1e-12))
        throw ConfigError("reposition action: entry outside [0,1]");
      row += x;
    }
    if (std::fabs(row - 1.0) > 1e-9)
      throw ConfigError("reposition action: row not stochastic");
  }
}

// Ring buffer of per-zone request counts, one entry per repositioning
// interval. Queries older than what has been observed are zero-padded.
class DemandHistory {
 public:
  explicit DemandHistory(int n_zones, std::size_t capacity = 64)
      : n_zones_(n_zones), capacity_(capacity) {
    if (n_zones <= 0 || capacity == 0) throw ConfigError("DemandHistory: bad sizes");
  }

  void push(std::vector<long> counts) {
    if (counts.size() != static_cast<std::size_t>(n_zones_))
      throw ConfigError("DemandHistory: zone count mismatch");
    buf_.push_back(std::move(counts));
    if (buf_.size() > capacity_) buf_.pop_front();
    ++seen_;
  }

  // Last q intervals, oldest first; missing history yields zero rows.
  std::vector<std::vector<long>> last(int q) const {
    if (q <= 0) throw ConfigError("DemandHistory: q must be positive");
    std::vector<std::vector<long>> out(static_cast<std::size_t>(q),
                                       std::vector<long>(static_cast<std::size_t>(n_zones_), 0));
    const int have = static_cast<int>(buf_.size());
    const int take = std::min(q, have);
    for (int k = 0; k < take; ++k)
      out[static_cast<std::size_t>(q - 1 - k)] = buf_[static_cast<std::size_t>(have - 1 - k)];
    return out;
  }

  // Mean count per interval over everything retained (zero when empty).
  double trailing_rate(int zone) const {
    if (buf_.empty()) return 0.0;
    double total = 0.0;
    for (const auto& row : buf_) total += static_cast<double>(row[static_cast<std::size_t>(zone)]);
    return total / static_cast<double>(buf_.size());
  }

  int n_zones() const { return n_zones_; }
  long intervals_seen() const { return seen_; }

 private:
  int n_zones_;
  std::size_t capacity_;
  std::deque<std::vector<long>> buf_;
  long seen_ = 0;
};

// N(t) columns: [c_idle, c_rep, c_arr, c_pass(t-q+1) .. c_pass(t), forecast...].
// c_rep counts repositioning vehicles by *target* zone; c_arr counts occupied
// vehicles by their passenger's destination zone.
inline ZoneGraph build_state(const std::vector<Vehicle>& vehicles,
                             const std::vector<Request>& requests,
                             const ServiceRegion& region, double vehicle_speed,
                             const DemandHistory& history, int q,
                             const Tensor2* forecast = nullptr) {
  const int n = region.n_zones();
  if (history.n_zones() != n) throw ConfigError("build_state: history zone mismatch");
  if (forecast && forecast->rows != n) throw ConfigError("build_state: forecast zone mismatch");
  const int f_cols = forecast ? forecast->cols : 0;

  ZoneGraph zg;
  zg.n_zones = n;
  zg.q = q;
  zg.node_features = Tensor2(n, 3 + q + f_cols);
  zg.adjacency = make_adjacency(region, vehicle_speed);

  std::unordered_map<int, const Request*> by_id;
  by_id.reserve(requests.size());
  for (const auto& r : requests) by_id[r.id] = &r;

  for (const auto& v : vehicles) {
    switch (v.state) {
      case VehicleState::Idle:
        zg.node_features.at(zone_of(v.position, region), 0) += 1.0;
        break;
      case VehicleState::Repositioning: {
        if (!v.task || !v.task->target_zone)
          throw InternalError("build_state: repositioning vehicle without target zone");
        zg.node_features.at(*v.task->target_zone, 1) += 1.0;
        break;
      }
      case VehicleState::EnRouteDropoff: {
        if (!v.task || !v.task->request_id)
          throw InternalError("build_state: occupied vehicle without request");
        auto it = by_id.find(*v.task->request_id);
        if (it == by_id.end()) throw InternalError("build_state: unknown request id");
        zg.node_features.at(zone_of(it->second->destination, region), 2) += 1.0;
        break;
      }
      case VehicleState::EnRoutePickup:
        break;  // neither idle, incoming-repositioning, nor arriving
    }
  }

  const auto past = history.last(q);
  for (int k = 0; k < q; ++k)
    for (int z = 0; z < n; ++z)
      zg.node_features.at(z, 3 + k) =
          static_cast<double>(past[static_cast<std::size_t>(k)][static_cast<std::size_t>(z)]);

  for (int k = 0; k < f_cols; ++k)
    for (int z = 0; z < n; ++z)
      zg.node_features.at(z, 3 + q + k) = forecast->at(z, k);

  return zg;
}

// Floor rule: from each zone i send floor(A_ij * c_i_idle) idle vehicles to
// each j != i (ascending j); longest-idle vehicles leave first, ties by id.
// The self fraction and flooring leftovers stay idle.
inline std::vector<std::pair<int, int>> action_to_dispatch(
    const RepositionAction& action, const std::vector<Vehicle>& vehicles,
    const ServiceRegion& region) {
  const int n = region.n_zones();
  validate_action(action, n);

  std::vector<std::vector<const Vehicle*>> idle_by_zone(static_cast<std::size_t>(n));
  for (const auto& v : vehicles)
    if (v.state == VehicleState::Idle)
      idle_by_zone[static_cast<std::size_t>(zone_of(v.position, region))].push_back(&v);
  for (auto& zs : idle_by_zone)
    std::sort(zs.begin(), zs.end(), [](const Vehicle* a, const Vehicle* b) {
      if (a->idle_since != b->idle_since) return a->idle_since < b->idle_since;
      return a->id < b->id;
    });

  std::vector<std::pair<int, int>> dispatches;
  for (int i = 0; i < n; ++i) {
    const auto& pool = idle_by_zone[static_cast<std::size_t>(i)];
    const auto c_idle = static_cast<double>(pool.size());
    std::size_t next = 0;
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      const auto rho = static_cast<std::size_t>(std::floor(action.a.at(i, j) * c_idle));
      for (std::size_t k = 0; k < rho; ++k) {
        if (next >= pool.size())
          throw InternalError("action_to_dispatch: floor rule exceeded idle pool");
        dispatches.emplace_back(pool[next]->id, j);
        ++next;
      }
    }
  }
  return dispatches;
}

// Eq-style per-step reward: waiting passengers accrue a penalty proportional
// to the step length; completed trips earn a terminal bonus.
inline double reward(const RewardCounts& counts, const RewardWeights& w, double delta) {
  if (counts.waiting < 0 || counts.served_delta < 0)
    throw ConfigError("reward: negative counts");
  return -w.omega * delta * static_cast<double>(counts.waiting + counts.served_delta) +
         w.sigma * static_cast<double>(counts.served_delta);
}

// The unique convex pair with -omega*W + sigma*S = -W/n. W is the accumulated
// wait in penalty units, S the served count, n the total request count.
inline RewardWeights calibrate_weights(double total_wait, double served, double total_requests) {
  if (!(total_requests >= 1.0)) throw ConfigError("calibrate_weights: no requests");
  if (!(total_wait > served)) throw ConfigError("calibrate_weights: degenerate W <= S");
  const double denom = total_requests * (total_wait + served);
  if (!(denom > 0.0)) throw ConfigError("calibrate_weights: degenerate denominator");
  RewardWeights w;
  w.omega = (total_wait + total_requests * served) / denom;
  w.sigma = 1.0 - w.omega;
  if (!(w.omega > 0.0 && w.omega <= 1.0))
    throw ConfigError("calibrate_weights: weights out of range");
  return w;
}

// Trailing-average per-interval rate, repeated across the horizon columns, so
// the row sum is the expected demand over the whole prediction horizon.
inline Tensor2 forecast_channel(const DemandHistory& history, int horizon_intervals) {
  if (horizon_intervals <= 0) throw ConfigError("forecast_channel: horizon must be positive");
  Tensor2 out(history.n_zones(), horizon_intervals);
  for (int z = 0; z < history.n_zones(); ++z) {
    const double rate = history.trailing_rate(z);
    for (int k = 0; k < horizon_intervals; ++k) out.at(z, k) = rate;
  }
  return out;
}

}  // namespace sams
