#ifndef TUBENET_ORACLE_HPP
#define TUBENET_ORACLE_HPP

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <queue>
#include <set>
#include <string>
#include <vector>

#include "tubenet/errors.hpp"
#include "tubenet/grid.hpp"
#include "tubenet/pathfinder.hpp"
#include "tubenet/planner.hpp"

namespace tubenet {

// Exact solvers over a grid-move model: a route is a sequence of 8- or
// 26-connected moves between cell centers. A move occupies its supercover
// (diagonal moves also occupy the corner-touched cells), so the occupancy
// rules match the sequential planner restricted to grid moves.

struct OracleRequest {
  std::string od_id;
  CellIndex start = 0;
  CellIndex goal = 0;
};

struct OracleOptions {
  /// Also forbid path cells inside another route's buffer.
  bool buffer_constraints = false;
  Axes buffer_radius{1, 1, 1};
  /// Wall-clock limit; zero means none.
  std::chrono::duration<double> timeout{0.0};
  /// brute force: abort once this many paths are stored for one route.
  std::size_t max_paths_per_route = 2'000'000;
  /// brute force: absolute per-route cost bound (infinite: widen until the
  /// enumeration is complete).
  double max_path_cost = std::numeric_limits<double>::infinity();
};

struct SpatialConflict {
  enum class Kind { PathPath, PathBuffer };
  std::size_t route_i = 0;  // holds the path cell
  std::size_t route_j = 0;  // path (PathPath) or buffer (PathBuffer) owner
  CellIndex cell = 0;
  Kind kind = Kind::PathPath;
};

struct OracleResult {
  bool solved = false;       // a conflict-free network was found
  bool optimal = false;      // and proven optimal
  bool infeasible = false;   // proven that no conflict-free network exists
  bool aborted = false;      // timeout or enumeration bound hit
  double total = 0.0;
  std::vector<Route> routes;
  std::size_t expanded = 0;  // CT nodes (cbs) or stored paths (brute force)
  double seconds = 0.0;
  std::string note;
};

namespace detail {

inline void check_oracle_weights(const CostWeights& w) {
  if (w.omega_p != 0.0) throw std::invalid_argument("oracles do not support a space cost weight");
  if (w.lambda_turning != 0.0) throw std::invalid_argument("oracles do not support turning costs");
}

/// Cost of a single grid move u→v: operational cost plus risk of the cells
/// first entered by the move.
inline double move_cost(const GridGraph& grid, CellIndex u, CellIndex v, const CostWeights& w) {
  double c = segment_operational(grid.center(v) - grid.center(u), w);
  if (w.omega_r > 0.0) {
    double risk = 0.0;
    for_each_traced_cell(grid.coord(u), grid.coord(v), [&](CellCoord x) {
      const CellIndex i = grid.index(x);
      if (i != u) risk += grid.theta(i);
      return true;
    });
    c += w.omega_r * w.lambda_r * risk;
  }
  return c;
}

inline double start_cost(const GridGraph& grid, CellIndex s, const CostWeights& w) {
  return w.omega_r > 0.0 ? w.omega_r * w.lambda_r * grid.theta(s) : 0.0;
}

struct Move {
  CellIndex to;
  double cost;
};

/// Move graph restricted to reachable cells; constraints are applied per
/// query through a forbidden-cell mask.
class MoveGraph {
 public:
  MoveGraph(const GridGraph& grid, const CostWeights& w) : grid_(&grid), out_(grid.size()) {
    std::array<CellCoord, 26> offs{};
    const int n = neighbour_offsets(grid, offs);
    for (CellIndex u = 0; u < static_cast<CellIndex>(grid.size()); ++u) {
      if (!grid.reachable(u)) continue;
      const CellCoord cu = grid.coord(u);
      for (int k = 0; k < n; ++k) {
        const CellCoord cv{cu.x + offs[k].x, cu.y + offs[k].y, cu.z + offs[k].z};
        if (!grid.in_bounds(cv)) continue;
        const bool ok = for_each_traced_cell(cu, cv, [&](CellCoord x) { return grid.reachable(grid.index(x)); });
        if (ok) out_[u].push_back({grid.index(cv), move_cost(grid, u, grid.index(cv), w)});
      }
    }
  }

  const GridGraph& grid() const { return *grid_; }
  const std::vector<Move>& out(CellIndex u) const { return out_[u]; }

  bool allowed(CellIndex u, CellIndex v, const std::vector<std::uint8_t>& forbidden) const {
    if (forbidden.empty()) return true;
    return for_each_traced_cell(grid_->coord(u), grid_->coord(v),
                                [&](CellCoord x) { return forbidden[grid_->index(x)] == 0; });
  }

 private:
  const GridGraph* grid_;
  std::vector<std::vector<Move>> out_;
};

/// Exact cost-to-goal for every cell (reverse Dijkstra), infinity if the
/// goal is unreachable.
inline std::vector<double> cost_to_goal(const MoveGraph& g, CellIndex goal, const std::vector<std::uint8_t>& forbidden) {
  const GridGraph& grid = g.grid();
  std::vector<std::vector<Move>> in(grid.size());
  for (CellIndex u = 0; u < static_cast<CellIndex>(grid.size()); ++u) {
    for (const Move& m : g.out(u)) {
      if (g.allowed(u, m.to, forbidden)) in[m.to].push_back({u, m.cost});
    }
  }
  std::vector<double> dist(grid.size(), std::numeric_limits<double>::infinity());
  using Item = std::pair<double, CellIndex>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
  if (forbidden.empty() || !forbidden[goal]) {
    dist[goal] = 0.0;
    pq.push({0.0, goal});
  }
  while (!pq.empty()) {
    auto [d, v] = pq.top();
    pq.pop();
    if (d != dist[v]) continue;
    for (const Move& m : in[v]) {
      if (d + m.cost < dist[m.to]) {
        dist[m.to] = d + m.cost;
        pq.push({dist[m.to], m.to});
      }
    }
  }
  return dist;
}

/// Optimal single-route search under forbidden cells (A* with Euclidean
/// heuristic; same tie-breaking as the planner).
inline std::optional<std::pair<std::vector<CellIndex>, double>> optimal_route(
    const MoveGraph& g, CellIndex start, CellIndex goal, const CostWeights& w,
    const std::vector<std::uint8_t>& forbidden) {
  const GridGraph& grid = g.grid();
  if (!grid.reachable(start) || !grid.reachable(goal)) return std::nullopt;
  if (!forbidden.empty() && (forbidden[start] || forbidden[goal])) return std::nullopt;
  std::vector<double> gval(grid.size(), std::numeric_limits<double>::infinity());
  std::vector<CellIndex> parent(grid.size(), -1);
  std::vector<std::uint8_t> closed(grid.size(), 0);
  std::priority_queue<OpenEntry, std::vector<OpenEntry>, OpenAfter> open;
  gval[start] = start_cost(grid, start, w);
  parent[start] = start;
  open.push({gval[start] + heuristic(grid, start, goal), gval[start], start});
  while (!open.empty()) {
    const OpenEntry top = open.top();
    open.pop();
    const CellIndex u = top.cell;
    if (closed[u] || top.g != gval[u]) continue;
    if (u == goal) break;
    closed[u] = 1;
    for (const Move& m : g.out(u)) {
      if (closed[m.to] || !g.allowed(u, m.to, forbidden)) continue;
      const double nd = gval[u] + m.cost;
      if (nd < gval[m.to]) {
        gval[m.to] = nd;
        parent[m.to] = u;
        open.push({nd + heuristic(grid, m.to, goal), nd, m.to});
      }
    }
  }
  if (!std::isfinite(gval[goal])) return std::nullopt;
  std::vector<CellIndex> path;
  for (CellIndex c = goal; c != start; c = parent[c]) path.push_back(c);
  path.push_back(start);
  std::reverse(path.begin(), path.end());
  return std::make_pair(std::move(path), gval[goal]);
}

inline Route oracle_route(const GridGraph& grid, const std::string& od, const std::vector<CellIndex>& nodes,
                          double cost, const Axes& radius) {
  Route r;
  r.od_id = od;
  r.waypoints = nodes;
  r.path_cells = polyline_cells(grid, nodes);
  r.buffer_cells = buffer_cells(r.path_cells, grid, radius);
  r.cost.total = cost;
  for (std::size_t i = 1; i < nodes.size(); ++i) {
    r.cost.operational += norm(grid.center(nodes[i]) - grid.center(nodes[i - 1]));
  }
  return r;
}

/// First conflict: smallest cell, then lowest route pair.
inline std::optional<SpatialConflict> first_conflict(const std::vector<Route>& routes, bool with_buffers) {
  std::optional<SpatialConflict> best;
  auto offer = [&](SpatialConflict c) {
    if (!best || c.cell < best->cell) best = c;
  };
  auto first_common = [](const std::vector<CellIndex>& a, const std::vector<CellIndex>& b) -> std::optional<CellIndex> {
    auto i = a.begin();
    auto j = b.begin();
    while (i != a.end() && j != b.end()) {
      if (*i < *j) {
        ++i;
      } else if (*j < *i) {
        ++j;
      } else {
        return *i;
      }
    }
    return std::nullopt;
  };
  for (std::size_t i = 0; i < routes.size(); ++i) {
    for (std::size_t j = i + 1; j < routes.size(); ++j) {
      if (auto c = first_common(routes[i].path_cells, routes[j].path_cells)) {
        offer({i, j, *c, SpatialConflict::Kind::PathPath});
      }
      if (!with_buffers) continue;
      if (auto c = first_common(routes[i].path_cells, routes[j].buffer_cells)) {
        offer({i, j, *c, SpatialConflict::Kind::PathBuffer});
      }
      if (auto c = first_common(routes[j].path_cells, routes[i].buffer_cells)) {
        offer({j, i, *c, SpatialConflict::Kind::PathBuffer});
      }
    }
  }
  return best;
}

}  // namespace detail

/// Conflict-based search over spatial conflicts. Constraints forbid cells for
/// one route; a path-buffer conflict at cell c branches into "route i avoids
/// c" and "route j keeps its path out of the buffer radius around c".
inline OracleResult cbs_spatial(const GridGraph& grid, const std::vector<OracleRequest>& requests,
                                const CostWeights& w, const OracleOptions& opts = {}) {
  detail::check_oracle_weights(w);
  const auto t0 = std::chrono::steady_clock::now();
  OracleResult res;
  if (requests.empty()) {
    res.solved = res.optimal = true;
    return res;
  }
  const detail::MoveGraph mg(grid, w);
  const std::size_t n = requests.size();

  struct Node {
    std::vector<std::vector<CellIndex>> forbidden;  // per route
    std::vector<Route> routes;
    double cost = 0.0;
    std::size_t n_constraints = 0;
    std::size_t serial = 0;
  };
  struct NodeAfter {
    bool operator()(const std::shared_ptr<Node>& a, const std::shared_ptr<Node>& b) const {
      if (a->cost != b->cost) return a->cost > b->cost;
      if (a->n_constraints != b->n_constraints) return a->n_constraints > b->n_constraints;
      return a->serial > b->serial;
    }
  };

  std::vector<std::uint8_t> mask(grid.size(), 0);
  auto replan = [&](Node& node, std::size_t i) {
    for (CellIndex c : node.forbidden[i]) mask[c] = 1;
    auto r = detail::optimal_route(mg, requests[i].start, requests[i].goal, w, mask);
    for (CellIndex c : node.forbidden[i]) mask[c] = 0;
    if (!r) return false;
    node.routes[i] = detail::oracle_route(grid, requests[i].od_id, r->first, r->second, opts.buffer_radius);
    return true;
  };
  auto total_of = [](const Node& node) {
    double t = 0.0;
    for (const Route& r : node.routes) t += r.cost.total;
    return t;
  };

  auto root = std::make_shared<Node>();
  root->forbidden.assign(n, {});
  root->routes.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!replan(*root, i)) {
      res.infeasible = true;
      res.note = "route " + requests[i].od_id + " has no path";
      res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      return res;
    }
  }
  root->cost = total_of(*root);

  auto timed_out = [&] {
    return opts.timeout.count() > 0.0 && std::chrono::steady_clock::now() - t0 > opts.timeout;
  };
  std::size_t serial = 0;
  std::priority_queue<std::shared_ptr<Node>, std::vector<std::shared_ptr<Node>>, NodeAfter> open;
  open.push(root);
  while (!open.empty()) {
    if (timed_out()) {
      res.aborted = true;
      res.note = "timeout";
      break;
    }
    auto node = open.top();
    open.pop();
    ++res.expanded;
    const auto conflict = detail::first_conflict(node->routes, opts.buffer_constraints);
    if (!conflict) {
      res.solved = res.optimal = true;
      res.routes = node->routes;
      res.total = node->cost;
      break;
    }
    // Branch A: route_i avoids the cell.
    {
      auto child = std::make_shared<Node>(*node);
      child->forbidden[conflict->route_i].push_back(conflict->cell);
      child->n_constraints = node->n_constraints + 1;
      child->serial = ++serial;
      if (replan(*child, conflict->route_i)) {
        child->cost = total_of(*child);
        open.push(child);
      }
    }
    // Branch B: route_j avoids the cell (path conflict) or its whole buffer
    // neighbourhood (path-buffer conflict).
    {
      auto child = std::make_shared<Node>(*node);
      auto& fb = child->forbidden[conflict->route_j];
      if (conflict->kind == SpatialConflict::Kind::PathPath) {
        fb.push_back(conflict->cell);
      } else {
        const CellCoord c = grid.coord(conflict->cell);
        const Axes& r = opts.buffer_radius;
        for (int dz = -r[2]; dz <= r[2]; ++dz) {
          for (int dy = -r[1]; dy <= r[1]; ++dy) {
            for (int dx = -r[0]; dx <= r[0]; ++dx) {
              const CellCoord q{c.x + dx, c.y + dy, c.z + dz};
              if (grid.in_bounds(q)) fb.push_back(grid.index(q));
            }
          }
        }
      }
      child->n_constraints = node->n_constraints + 1;
      child->serial = ++serial;
      if (replan(*child, conflict->route_j)) {
        child->cost = total_of(*child);
        open.push(child);
      }
    }
  }
  if (!res.solved && !res.aborted) res.infeasible = true;
  res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

namespace detail {

using Bits = std::vector<std::uint64_t>;

inline bool intersects(const Bits& a, const Bits& b) {
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] & b[i]) return true;
  }
  return false;
}

struct Candidate {
  double cost;
  std::vector<CellIndex> nodes;
  Bits path;
  Bits buffer;
};

}  // namespace detail

/// Exhaustive search: enumerates every simple move path per route within
/// (its optimum + slack), picks the cheapest conflict-free combination, and
/// widens the slack until optimality is proven or the enumeration is complete.
inline OracleResult brute_force_optimal(const GridGraph& grid, const std::vector<OracleRequest>& requests,
                                        const CostWeights& w, const OracleOptions& opts = {}) {
  detail::check_oracle_weights(w);
  const auto t0 = std::chrono::steady_clock::now();
  OracleResult res;
  if (requests.empty()) {
    res.solved = res.optimal = true;
    return res;
  }
  const detail::MoveGraph mg(grid, w);
  const std::size_t n = requests.size();
  const std::size_t words = (grid.size() + 63) / 64;

  // Every route's endpoints are path cells, so no other route may touch them
  // (nor their buffer boxes when buffers count).
  std::vector<std::vector<std::uint8_t>> forb(n, std::vector<std::uint8_t>(grid.size(), 0));
  for (std::size_t j = 0; j < n; ++j) {
    std::vector<CellIndex> ends{requests[j].start, requests[j].goal};
    if (opts.buffer_constraints) {
      for (CellIndex b : buffer_cells(std::vector<CellIndex>{requests[j].start}, grid, opts.buffer_radius)) ends.push_back(b);
      for (CellIndex b : buffer_cells(std::vector<CellIndex>{requests[j].goal}, grid, opts.buffer_radius)) ends.push_back(b);
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (i == j) continue;
      for (CellIndex c : ends) forb[i][c] = 1;
    }
  }
  auto timed_out = [&] {
    return opts.timeout.count() > 0.0 && std::chrono::steady_clock::now() - t0 > opts.timeout;
  };

  std::vector<std::vector<double>> h(n);
  std::vector<double> opt(n);
  double opt_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    h[i] = detail::cost_to_goal(mg, requests[i].goal, forb[i]);
    const CellIndex s = requests[i].start;
    opt[i] = grid.reachable(s) ? detail::start_cost(grid, s, w) + h[i][s] : std::numeric_limits<double>::infinity();
    if (!std::isfinite(opt[i])) {
      res.infeasible = true;
      res.note = "route " + requests[i].od_id + " has no path clear of the other endpoints";
      return res;
    }
    opt_sum += opt[i];
  }

  double slack = 0.5 * std::min({grid.cell_size().x, grid.cell_size().y, grid.cell_size().z});
  const double eps = 1e-9 * std::max(1.0, opt_sum);
  for (;;) {
    if (timed_out()) {
      res.aborted = true;
      res.note = "timeout";
      break;
    }
    // Enumerate candidates per route.
    std::vector<std::vector<detail::Candidate>> cands(n);
    bool complete = true;
    bool overflow = false;
    for (std::size_t i = 0; i < n && !overflow; ++i) {
      const double bound = std::min(opt[i] + slack, opts.max_path_cost);
      std::vector<CellIndex> stack{requests[i].start};
      std::vector<std::uint8_t> on_path(grid.size(), 0);
      on_path[requests[i].start] = 1;
      const CellIndex goal = requests[i].goal;
      std::size_t calls = 0;
      auto dfs = [&](auto&& self, CellIndex u, double g) -> void {
        if (overflow) return;
        if ((++calls & 0xfff) == 0 && timed_out()) {
          overflow = true;
          return;
        }
        if (u == goal) {
          detail::Candidate c;
          c.cost = g;
          c.nodes = stack;
          c.path.assign(words, 0);
          for (CellIndex x : polyline_cells(grid, stack)) c.path[x / 64] |= 1ull << (x % 64);
          c.buffer.assign(words, 0);
          if (opts.buffer_constraints) {
            std::vector<CellIndex> cells = polyline_cells(grid, stack);
            for (CellIndex x : buffer_cells(cells, grid, opts.buffer_radius)) c.buffer[x / 64] |= 1ull << (x % 64);
          }
          cands[i].push_back(std::move(c));
          if (cands[i].size() > opts.max_paths_per_route) overflow = true;
          return;
        }
        for (const detail::Move& m : mg.out(u)) {
          if (on_path[m.to]) continue;
          const double ng = g + m.cost;
          if (!std::isfinite(h[i][m.to]) || !mg.allowed(u, m.to, forb[i])) continue;
          if (ng + h[i][m.to] > bound + eps) {
            complete = false;
            continue;
          }
          on_path[m.to] = 1;
          stack.push_back(m.to);
          self(self, m.to, ng);
          stack.pop_back();
          on_path[m.to] = 0;
        }
      };
      dfs(dfs, requests[i].start, detail::start_cost(grid, requests[i].start, w));
      std::stable_sort(cands[i].begin(), cands[i].end(),
                       [](const detail::Candidate& a, const detail::Candidate& b) { return a.cost < b.cost; });
    }
    for (const auto& c : cands) res.expanded = std::max(res.expanded, c.size());
    if (overflow) {
      res.aborted = true;
      res.note = timed_out() ? "timeout" : "path enumeration bound exceeded at slack " + std::to_string(slack);
      break;
    }

    // Cheapest compatible combination.
    double best = std::numeric_limits<double>::infinity();
    std::vector<std::size_t> pick(n), best_pick;
    std::vector<double> min_rest(n + 1, 0.0);
    for (std::size_t i = n; i-- > 0;) min_rest[i] = min_rest[i + 1] + (cands[i].empty() ? 0.0 : cands[i][0].cost);
    bool any_empty = std::any_of(cands.begin(), cands.end(), [](const auto& c) { return c.empty(); });
    std::size_t steps = 0;
    bool stopped = false;
    auto combine = [&](auto&& self, std::size_t i, double acc) -> void {
      if (stopped) return;
      if (i == n) {
        if (acc < best) {
          best = acc;
          best_pick = pick;
        }
        return;
      }
      for (std::size_t k = 0; k < cands[i].size(); ++k) {
        if ((++steps & 0xffff) == 0 && timed_out()) {
          stopped = true;
          return;
        }
        const detail::Candidate& c = cands[i][k];
        if (acc + c.cost + min_rest[i + 1] >= best) break;
        bool ok = true;
        for (std::size_t j = 0; j < i && ok; ++j) {
          const detail::Candidate& o = cands[j][pick[j]];
          ok = !detail::intersects(c.path, o.path);
          if (ok && opts.buffer_constraints) {
            ok = !detail::intersects(c.path, o.buffer) && !detail::intersects(c.buffer, o.path);
          }
        }
        if (!ok) continue;
        pick[i] = k;
        self(self, i + 1, acc + c.cost);
      }
    };
    if (!any_empty) combine(combine, 0, 0.0);
    if (stopped) {
      res.aborted = true;
      res.note = "timeout";
      break;
    }

    if (std::isfinite(best) && (best <= opt_sum + slack + eps || complete)) {
      res.solved = res.optimal = true;
      res.total = best;
      for (std::size_t i = 0; i < n; ++i) {
        const auto& c = cands[i][best_pick[i]];
        res.routes.push_back(detail::oracle_route(grid, requests[i].od_id, c.nodes, c.cost, opts.buffer_radius));
      }
      break;
    }
    if (complete) {
      res.infeasible = true;
      break;
    }
    if (std::isfinite(best)) {
      slack = best - opt_sum;
    } else {
      const double max_slack = opts.max_path_cost;
      if (std::isfinite(max_slack) && std::all_of(opt.begin(), opt.end(), [&](double o) { return o + slack >= max_slack; })) {
        res.aborted = true;
        res.note = "no conflict-free combination within the path cost bound";
        break;
      }
      slack *= 2.0;
    }
  }
  res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

/// Maps OD requests to oracle requests using each vertiport's anchor cell.
inline std::vector<OracleRequest> oracle_requests(const GridGraph& grid, const Scenario& scenario,
                                                  const std::vector<ODRequest>& requests) {
  std::vector<OracleRequest> out;
  for (const ODRequest& r : requests) {
    const Vertiport* o = scenario.find_vertiport(r.origin_vertiport);
    const Vertiport* d = scenario.find_vertiport(r.dest_vertiport);
    if (!o || !d) throw ValidationError(r.id, "unknown vertiport");
    const auto a = grid.locate(vertiport_anchor(grid, *o));
    const auto b = grid.locate(vertiport_anchor(grid, *d));
    if (!a || !b) throw GridError("vertiport outside grid for " + r.id);
    out.push_back({r.id, grid.index(*a), grid.index(*b)});
  }
  return out;
}

}  // namespace tubenet

#endif  // TUBENET_ORACLE_HPP
