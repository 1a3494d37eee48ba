#ifndef TUBENET_PLANNER_HPP
#define TUBENET_PLANNER_HPP

#include <algorithm>
#include <atomic>
#include <chrono>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "tubenet/errors.hpp"
#include "tubenet/grid.hpp"
#include "tubenet/pathfinder.hpp"
#include "tubenet/prioritizer.hpp"
#include "tubenet/scenario.hpp"

namespace tubenet {

/// Per-OD scaling factors (λ_r, λ_p), keyed by request id.
using LambdaTable = std::map<std::string, std::pair<double, double>>;

struct PlannerConfig {
  RouteGeometry geometry;
  CostWeights weights;
  SearchOptions search;
  /// Calibrate λ_r, λ_p per OD pair. When false the values in `weights`
  /// apply to every route.
  bool calibrate = true;
  /// Precomputed factors; when set, plan_network skips calibration.
  std::optional<LambdaTable> lambdas;
  double theta_max = 1.5;
  /// Keep the landing areas of not-yet-planned requests, with their buffer
  /// box, clear of earlier routes.
  bool hold_pending_endpoints = true;
  /// Worker threads for sequence evaluation; 0 = hardware concurrency.
  unsigned threads = 0;
};

struct RouteFailure {
  std::string od_id;
  std::string reason;

  friend bool operator==(const RouteFailure&, const RouteFailure&) = default;
};

struct RouteNetwork {
  std::size_t sequence_id = 0;
  std::vector<std::string> order;
  std::vector<Route> routes;
  CostBreakdown totals;
  double raw_risk = 0.0;
  double raw_space = 0.0;
  std::size_t path_cells = 0;    // |union of path cells|
  std::size_t buffer_cells = 0;  // |union of buffer cells \ path cells|
  std::size_t total_occupied = 0;
  bool feasible = true;
  std::vector<RouteFailure> failures;
  bool risk_passed = true;
  double seconds = 0.0;  // wall time, not part of any deterministic output
};

/// Unions path and buffer cells over all routes and fills the totals.
inline void summarize(RouteNetwork& net) {
  net.totals = {};
  net.raw_risk = 0.0;
  net.raw_space = 0.0;
  std::vector<CellIndex> path;
  std::vector<CellIndex> buf;
  for (const Route& r : net.routes) {
    net.totals.operational += r.cost.operational;
    net.totals.risk += r.cost.risk;
    net.totals.space += r.cost.space;
    net.totals.total += r.cost.total;
    net.raw_risk += r.raw_risk;
    net.raw_space += r.raw_space;
    path.insert(path.end(), r.path_cells.begin(), r.path_cells.end());
    buf.insert(buf.end(), r.buffer_cells.begin(), r.buffer_cells.end());
  }
  std::sort(path.begin(), path.end());
  path.erase(std::unique(path.begin(), path.end()), path.end());
  std::sort(buf.begin(), buf.end());
  buf.erase(std::unique(buf.begin(), buf.end()), buf.end());
  std::vector<CellIndex> only_buf;
  std::set_difference(buf.begin(), buf.end(), path.begin(), path.end(), std::back_inserter(only_buf));
  net.path_cells = path.size();
  net.buffer_cells = only_buf.size();
  net.total_occupied = net.path_cells + net.buffer_cells;
  net.feasible = net.failures.empty();
}

/// Mean θ over each route's path cells compared against theta_max.
inline std::vector<bool> risk_check(const RouteNetwork& net, const GridGraph& grid, double theta_max) {
  std::vector<bool> pass;
  pass.reserve(net.routes.size());
  for (const Route& r : net.routes) {
    double sum = 0.0;
    for (CellIndex c : r.path_cells) sum += grid.theta(c);
    const double mean = r.path_cells.empty() ? 0.0 : sum / static_cast<double>(r.path_cells.size());
    pass.push_back(mean <= theta_max);
  }
  return pass;
}

inline bool risk_check_passes(const RouteNetwork& net, const GridGraph& grid, double theta_max) {
  const auto pass = risk_check(net, grid, theta_max);
  return std::all_of(pass.begin(), pass.end(), [](bool b) { return b; });
}

struct SeparationReport {
  std::size_t path_path = 0;          // cells shared by two paths
  std::size_t path_in_buffer = 0;     // path cells inside another route's buffer
  std::size_t shared_buffer = 0;      // cells in two or more buffers (allowed)
  bool ok() const { return path_path == 0 && path_in_buffer == 0; }
};

/// Exhaustive pairwise check of the separation rule.
inline SeparationReport check_separation(const std::vector<Route>& routes) {
  SeparationReport rep;
  std::unordered_map<CellIndex, int> path_owner;
  std::unordered_map<CellIndex, int> buffer_users;
  for (std::size_t i = 0; i < routes.size(); ++i) {
    for (CellIndex c : routes[i].path_cells) {
      if (!path_owner.emplace(c, static_cast<int>(i)).second) ++rep.path_path;
    }
    for (CellIndex c : routes[i].buffer_cells) ++buffer_users[c];
  }
  for (std::size_t i = 0; i < routes.size(); ++i) {
    for (CellIndex c : routes[i].buffer_cells) {
      auto it = path_owner.find(c);
      if (it != path_owner.end() && it->second != static_cast<int>(i)) ++rep.path_in_buffer;
    }
  }
  for (const auto& [cell, n] : buffer_users) {
    if (n >= 2) ++rep.shared_buffer;
  }
  return rep;
}

namespace detail {

inline const ODRequest& find_request(const std::vector<ODRequest>& requests, const std::string& id) {
  for (const ODRequest& r : requests) {
    if (r.id == id) return r;
  }
  throw std::invalid_argument("unknown OD id " + id);
}

inline CostWeights weights_for(const PlannerConfig& cfg, const LambdaTable& lambdas, const std::string& od) {
  CostWeights w = cfg.weights;
  if (auto it = lambdas.find(od); it != lambdas.end()) {
    w.lambda_r = it->second.first;
    w.lambda_p = it->second.second;
  }
  return w;
}

}  // namespace detail

/// Per-OD calibration on the empty overlay. ODs whose baseline search fails
/// keep the configured λ values (they will fail in planning as well).
inline LambdaTable calibrate_all(const GridGraph& grid, const Scenario& scenario,
                                 const std::vector<ODRequest>& requests, const PlannerConfig& cfg) {
  LambdaTable table;
  if (!cfg.calibrate || (cfg.weights.omega_r == 0.0 && cfg.weights.omega_p == 0.0)) return table;
  OccupancyOverlay empty(grid, cfg.geometry);
  SearchWorkspace ws;
  for (const ODRequest& r : requests) {
    const Vertiport* o = scenario.find_vertiport(r.origin_vertiport);
    const Vertiport* d = scenario.find_vertiport(r.dest_vertiport);
    if (!o || !d) continue;
    const auto a = resolve_endpoint(empty, *o);
    const auto b = resolve_endpoint(empty, *d);
    if (!a || !b) continue;
    try {
      table[r.id] = calibrate_lambdas(grid, *a, *b, cfg.weights, cfg.geometry, &ws);
    } catch (const CalibrationError&) {
    }
  }
  return table;
}

/// Plans the requests in the given order over a fresh overlay. Failed ODs
/// are recorded and planning continues.
inline RouteNetwork plan_sequence(const GridGraph& grid, const Scenario& scenario,
                                  const std::vector<ODRequest>& ordered, const PlannerConfig& cfg,
                                  const LambdaTable& lambdas = {}, SearchWorkspace* workspace = nullptr) {
  const auto t0 = std::chrono::steady_clock::now();
  SearchWorkspace local;
  SearchWorkspace& ws = workspace ? *workspace : local;
  RouteNetwork net;
  OccupancyOverlay overlay(grid, cfg.geometry);
  // Keep-out region per vertiport (landing area plus buffer), held while a
  // later request still uses it.
  std::map<std::string, std::vector<CellIndex>> box;
  std::map<std::string, int> pending;
  if (cfg.hold_pending_endpoints) {
    for (const ODRequest& r : ordered) {
      for (const std::string& id : {r.origin_vertiport, r.dest_vertiport}) {
        const Vertiport* v = scenario.find_vertiport(id);
        if (!v) continue;
        if (!box.contains(id)) {
          std::vector<CellIndex> area;
          for (CellIndex c : vertiport_cells(grid, *v))
            if (grid.reachable(c)) area.push_back(c);
          if (area.empty()) continue;
          std::vector<CellIndex> cells = buffer_cells(area, grid, cfg.geometry.buffer_radius);
          cells.insert(cells.end(), area.begin(), area.end());
          box.emplace(id, std::move(cells));
        }
        ++pending[id];
      }
    }
    for (const auto& [id, cells] : box) overlay.hold(cells);
  }
  auto release = [&](const std::string& id) {
    if (auto it = box.find(id); it != box.end()) overlay.release(it->second);
  };
  auto rehold = [&](const std::string& id) {
    if (auto it = box.find(id); it != box.end() && --pending[id] > 0) overlay.hold(it->second);
  };
  for (const ODRequest& r : ordered) {
    net.order.push_back(r.id);
    const Vertiport* o = scenario.find_vertiport(r.origin_vertiport);
    const Vertiport* d = scenario.find_vertiport(r.dest_vertiport);
    release(r.origin_vertiport);
    release(r.dest_vertiport);
    const auto a = o ? resolve_endpoint(overlay, *o) : std::nullopt;
    const auto b = d ? resolve_endpoint(overlay, *d) : std::nullopt;
    if (!o || !d) {
      net.failures.push_back({r.id, "unknown vertiport"});
    } else if (!a || !b) {
      net.failures.push_back({r.id, "no free cell at vertiport"});
    } else {
      try {
        Route route = find_path(overlay, *a, *b, detail::weights_for(cfg, lambdas, r.id), cfg.search, &ws);
        route.od_id = r.id;
        overlay.apply(route);
        net.routes.push_back(std::move(route));
      } catch (const NoPathError& e) {
        net.failures.push_back({r.id, e.what()});
      }
    }
    rehold(r.origin_vertiport);
    rehold(r.dest_vertiport);
  }
  summarize(net);
  net.risk_passed = risk_check_passes(net, grid, cfg.theta_max);
  net.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return net;
}

struct NetworkPlan {
  RouteNetwork best;
  std::vector<RouteNetwork> networks;  // one per sequence, in sequence order
  SequenceBatch batch;
  LambdaTable lambdas;
};

/// Runs `fn(i, workspace)` for i in [0, n) on up to `threads` workers.
template <class Fn>
void parallel_for(std::size_t n, unsigned threads, Fn&& fn) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(n, 1)));
  if (threads <= 1) {
    SearchWorkspace ws;
    for (std::size_t i = 0; i < n; ++i) fn(i, ws);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  std::vector<std::jthread> pool;
  for (unsigned t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      SearchWorkspace ws;
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i, ws);
        } catch (...) {
          std::lock_guard lock(error_mu);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  pool.clear();
  if (error) std::rethrow_exception(error);
}

/// Plans every prioritized sequence and returns the cheapest feasible network
/// that passes the risk check (ties: lowest sequence index).
inline NetworkPlan plan_network(const GridGraph& grid, const Scenario& scenario,
                                const std::vector<ODRequest>& requests, const PrioritySpec& priority,
                                const PlannerConfig& cfg) {
  cfg.weights.validate();
  NetworkPlan plan;
  plan.batch = generate_sequences(requests, priority);
  plan.lambdas = cfg.lambdas ? *cfg.lambdas : calibrate_all(grid, scenario, requests, cfg);
  const auto& seqs = plan.batch.sequences;
  plan.networks.resize(seqs.size());
  parallel_for(seqs.size(), cfg.threads, [&](std::size_t k, SearchWorkspace& ws) {
    std::vector<ODRequest> ordered;
    for (const std::string& id : seqs[k].order) ordered.push_back(detail::find_request(requests, id));
    plan.networks[k] = plan_sequence(grid, scenario, ordered, cfg, plan.lambdas, &ws);
    plan.networks[k].sequence_id = k;
  });

  const RouteNetwork* best = nullptr;
  for (const RouteNetwork& n : plan.networks) {
    if (!n.feasible || !n.risk_passed) continue;
    if (!best || n.totals.total < best->totals.total) best = &n;
  }
  if (!best) {
    std::vector<std::string> details;
    for (const RouteNetwork& n : plan.networks) {
      std::ostringstream os;
      os << "sequence " << n.sequence_id << ":";
      if (n.failures.empty()) os << " risk check failed";
      for (const RouteFailure& f : n.failures) os << " " << f.od_id << " (" << f.reason << ")";
      details.push_back(os.str());
    }
    throw InfeasibleNetworkError("fail to generate a feasible route network", std::move(details));
  }
  plan.best = *best;
  return plan;
}

}  // namespace tubenet

#endif  // TUBENET_PLANNER_HPP
