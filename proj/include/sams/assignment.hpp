#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include "sams/common.hpp"
#include "sams/domain.hpp"

namespace sams {

// One matching decision instant: unassigned requests vs available vehicles.
struct AssignmentInstance {
  struct Req {
    int id = -1;
    Position origin{};
    double wait = 0.0;  // elapsed wait in seconds
  };
  struct Veh {
    int id = -1;
    Position position{};
  };
  std::vector<Req> requests;
  std::vector<Veh> vehicles;
  double alpha = 0.0;  // wait-to-distance conversion weight, meters/second
};

struct AssignmentResult {
  std::vector<std::pair<int, int>> matches;  // (request id, vehicle id)
  double objective_value = 0.0;              // meters-equivalent
};

namespace detail {

// Min-cost rectangular assignment by shortest augmenting paths with dual
// potentials (Hungarian). Requires n_rows <= n_cols; matches every row.
// Costs may be negative. row_of_col[j] is the matched row or -1.
inline std::vector<int> hungarian_rect(const std::vector<std::vector<double>>& cost) {
  const int n = static_cast<int>(cost.size());
  const int m = n ? static_cast<int>(cost[0].size()) : 0;
  if (n > m) throw InternalError("hungarian_rect: needs n_rows <= n_cols");
  const double kInf = std::numeric_limits<double>::infinity();
  // 1-indexed with a virtual row/column 0
  std::vector<double> u(static_cast<std::size_t>(n) + 1, 0.0);
  std::vector<double> v(static_cast<std::size_t>(m) + 1, 0.0);
  std::vector<int> p(static_cast<std::size_t>(m) + 1, 0);
  std::vector<int> way(static_cast<std::size_t>(m) + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(static_cast<std::size_t>(m) + 1, kInf);
    std::vector<char> used(static_cast<std::size_t>(m) + 1, 0);
    do {
      used[static_cast<std::size_t>(j0)] = 1;
      const int i0 = p[static_cast<std::size_t>(j0)];
      int j1 = -1;
      double delta = kInf;
      for (int j = 1; j <= m; ++j) {
        if (used[static_cast<std::size_t>(j)]) continue;
        const double cur = cost[static_cast<std::size_t>(i0) - 1][static_cast<std::size_t>(j) - 1] -
                           u[static_cast<std::size_t>(i0)] - v[static_cast<std::size_t>(j)];
        if (cur < minv[static_cast<std::size_t>(j)]) {
          minv[static_cast<std::size_t>(j)] = cur;
          way[static_cast<std::size_t>(j)] = j0;
        }
        if (minv[static_cast<std::size_t>(j)] < delta) {
          delta = minv[static_cast<std::size_t>(j)];
          j1 = j;
        }
      }
      for (int j = 0; j <= m; ++j) {
        if (used[static_cast<std::size_t>(j)]) {
          u[static_cast<std::size_t>(p[static_cast<std::size_t>(j)])] += delta;
          v[static_cast<std::size_t>(j)] -= delta;
        } else {
          minv[static_cast<std::size_t>(j)] -= delta;
        }
      }
      j0 = j1;
    } while (p[static_cast<std::size_t>(j0)] != 0);
    do {
      const int j1 = way[static_cast<std::size_t>(j0)];
      p[static_cast<std::size_t>(j0)] = p[static_cast<std::size_t>(j1)];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> row_of_col(static_cast<std::size_t>(m), -1);
  for (int j = 1; j <= m; ++j)
    if (p[static_cast<std::size_t>(j)] != 0)
      row_of_col[static_cast<std::size_t>(j) - 1] = p[static_cast<std::size_t>(j)] - 1;
  return row_of_col;
}

inline void validate_instance(const AssignmentInstance& inst) {
  if (inst.alpha < 0.0) throw ConfigError("assignment: alpha must be >= 0");
  auto check_unique = [](auto sorted_ids) {
    for (std::size_t i = 1; i < sorted_ids.size(); ++i)
      if (sorted_ids[i] == sorted_ids[i - 1])
        throw ConfigError("assignment: duplicate id in instance");
  };
  std::vector<int> rids, vids;
  for (const auto& r : inst.requests) rids.push_back(r.id);
  for (const auto& v : inst.vehicles) vids.push_back(v.id);
  std::sort(rids.begin(), rids.end());
  std::sort(vids.begin(), vids.end());
  check_unique(rids);
  check_unique(vids);
}

}  // namespace detail

// Optimization-based strategy S2. With more requests than vehicles it
// minimizes sum(d_rv - alpha * w_r) matching every vehicle; otherwise it
// minimizes sum(d_rv) matching every request. Solutions are integral.
// Input order never affects the result: rows and columns are sorted by id.
inline AssignmentResult assign_s2(const AssignmentInstance& inst) {
  detail::validate_instance(inst);
  AssignmentResult result;
  if (inst.requests.empty() || inst.vehicles.empty()) return result;

  std::vector<AssignmentInstance::Req> reqs = inst.requests;
  std::vector<AssignmentInstance::Veh> vehs = inst.vehicles;
  std::sort(reqs.begin(), reqs.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  std::sort(vehs.begin(), vehs.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  const std::size_t nr = reqs.size(), nv = vehs.size();

  if (nr <= nv) {
    std::vector<std::vector<double>> cost(nr, std::vector<double>(nv));
    for (std::size_t r = 0; r < nr; ++r)
      for (std::size_t v = 0; v < nv; ++v)
        cost[r][v] = l1_distance(reqs[r].origin, vehs[v].position);
    const std::vector<int> row_of_col = detail::hungarian_rect(cost);
    for (std::size_t v = 0; v < nv; ++v) {
      const int r = row_of_col[v];
      if (r < 0) continue;
      result.matches.emplace_back(reqs[static_cast<std::size_t>(r)].id, vehs[v].id);
      result.objective_value += cost[static_cast<std::size_t>(r)][v];
    }
  } else {
    // rows are vehicles so that every vehicle is matched (excess requests wait)
    std::vector<std::vector<double>> cost(nv, std::vector<double>(nr));
    for (std::size_t v = 0; v < nv; ++v)
      for (std::size_t r = 0; r < nr; ++r)
        cost[v][r] = l1_distance(reqs[r].origin, vehs[v].position) - inst.alpha * reqs[r].wait;
    const std::vector<int> veh_of_req = detail::hungarian_rect(cost);
    for (std::size_t r = 0; r < nr; ++r) {
      const int v = veh_of_req[r];
      if (v < 0) continue;
      result.matches.emplace_back(reqs[r].id, vehs[static_cast<std::size_t>(v)].id);
      result.objective_value += cost[static_cast<std::size_t>(v)][r];
    }
  }
  std::sort(result.matches.begin(), result.matches.end());
  return result;
}

// FCFS strategy S1: requests in arrival order (longest wait first, ties by
// ascending id) each take the nearest unmatched vehicle (ties by lowest id).
// The objective is evaluated with the same expression assign_s2 would use.
inline AssignmentResult assign_s1(const AssignmentInstance& inst) {
  detail::validate_instance(inst);
  AssignmentResult result;
  if (inst.requests.empty() || inst.vehicles.empty()) return result;

  std::vector<AssignmentInstance::Req> reqs = inst.requests;
  std::sort(reqs.begin(), reqs.end(), [](const auto& a, const auto& b) {
    if (a.wait != b.wait) return a.wait > b.wait;
    return a.id < b.id;
  });
  const bool excess_requests = inst.requests.size() > inst.vehicles.size();
  std::vector<char> taken(inst.vehicles.size(), 0);
  std::size_t matched = 0;
  for (const auto& req : reqs) {
    if (matched == inst.vehicles.size()) break;
    double best = std::numeric_limits<double>::infinity();
    int best_idx = -1;
    for (std::size_t v = 0; v < inst.vehicles.size(); ++v) {
      if (taken[v]) continue;
      const double d = l1_distance(req.origin, inst.vehicles[v].position);
      if (d < best || (d == best && best_idx >= 0 &&
                       inst.vehicles[v].id < inst.vehicles[static_cast<std::size_t>(best_idx)].id)) {
        best = d;
        best_idx = static_cast<int>(v);
      }
    }
    if (best_idx < 0) break;
    taken[static_cast<std::size_t>(best_idx)] = 1;
    result.matches.emplace_back(req.id, inst.vehicles[static_cast<std::size_t>(best_idx)].id);
    result.objective_value += excess_requests ? best - inst.alpha * req.wait : best;
    ++matched;
  }
  std::sort(result.matches.begin(), result.matches.end());
  return result;
}

}  // namespace sams
