#ifndef TUBENET_PATHFINDER_HPP
#define TUBENET_PATHFINDER_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <queue>
#include <span>
#include <utility>
#include <vector>

#include "tubenet/errors.hpp"
#include "tubenet/geometry.hpp"
#include "tubenet/grid.hpp"

namespace tubenet {

struct CostWeights {
  double omega_r = 0.0;
  double omega_p = 0.0;
  double lambda_turning = 0.0;
  double lambda_climbing = 0.0;
  double lambda_descending = 0.0;
  double lambda_r = 1.0;
  double lambda_p = 1.0;

  void validate() const {
    if (omega_r < 0 || omega_p < 0 || lambda_turning < 0 || lambda_climbing < 0 || lambda_descending < 0) {
      throw std::invalid_argument("cost weights must be non-negative");
    }
    if (!(lambda_r > 0) || !(lambda_p > 0)) throw std::invalid_argument("lambda_r and lambda_p must be positive");
  }
};

struct SearchOptions {
  /// Heuristic inflation; 1 keeps the heuristic admissible.
  double heuristic_weight = 1.0;
  /// false restricts parents to grid neighbours (no line-of-sight shortcuts).
  bool any_angle = true;
  /// Also scale the heuristic by 1 + ω_r + ω_p, the calibrated cost per meter
  /// of the baseline path. Keeps an inflated search about equally greedy
  /// across weight settings. Not admissible.
  bool normalized_heuristic = false;
};

/// Straight-line distance between cell centers.
inline double heuristic(const GridGraph& grid, CellIndex cell, CellIndex goal) {
  return norm(grid.center(goal) - grid.center(cell));
}

namespace detail {

inline double turning_angle(Vec3 l1, Vec3 l2) {
  const double c = dot(l1, l2) / (norm(l1) * norm(l2));
  return std::abs(std::acos(std::clamp(c, -1.0, 1.0)));
}

inline double segment_operational(Vec3 l, const CostWeights& w) {
  const double len = norm(l);
  double cost = len;
  if (len > 0.0 && (w.lambda_climbing > 0.0 || w.lambda_descending > 0.0)) {
    const double pitch = std::asin(std::clamp(l.z / len, -1.0, 1.0));
    cost += w.lambda_climbing * std::max(pitch, 0.0) * len;
    cost += w.lambda_descending * std::max(-pitch, 0.0) * len;
  }
  return cost;
}

}  // namespace detail

/// Traversal + turning + climbing + descending along a polyline.
inline double operational_cost(std::span<const Vec3> polyline, const CostWeights& w) {
  if (polyline.size() < 2) throw std::invalid_argument("operational_cost needs at least two waypoints");
  double cost = 0.0;
  for (std::size_t i = 1; i < polyline.size(); ++i) {
    const Vec3 l = polyline[i] - polyline[i - 1];
    if (norm(l) == 0.0) throw std::invalid_argument("zero-length segment in polyline");
    cost += detail::segment_operational(l, w);
    if (i + 1 < polyline.size()) {
      const Vec3 next = polyline[i + 1] - polyline[i];
      if (norm(next) == 0.0) throw std::invalid_argument("zero-length segment in polyline");
      cost += w.lambda_turning * detail::turning_angle(l, next);
    }
  }
  return cost;
}

/// Raw (unscaled) costs of one edge appended to a partial path.
struct EdgeCost {
  double operational = 0.0;
  double raw_risk = 0.0;
  double raw_space = 0.0;

  double total(const CostWeights& w) const {
    return operational + w.omega_r * (w.lambda_r * raw_risk) + w.omega_p * (w.lambda_p * raw_space);
  }
};

/// Scratch buffers reused across searches on grids of one size.
class SearchWorkspace {
 public:
  void prepare(std::size_t cells) {
    if (g_.size() != cells) {
      g_.assign(cells, 0.0);
      parent_.assign(cells, -1);
      node_gen_.assign(cells, 0);
      closed_gen_.assign(cells, 0);
      path_stamp_.assign(cells, 0);
      buf_stamp_.assign(cells, 0);
      chain_path_.assign(cells, 0);
      chain_foot_.assign(cells, 0);
      chain_gen_ = 0;
      search_gen_ = 0;
      edge_gen_ = 0;
    }
    marked_end_ = -1;
    if (++search_gen_ == 0) {
      std::fill(node_gen_.begin(), node_gen_.end(), 0);
      std::fill(closed_gen_.begin(), closed_gen_.end(), 0);
      search_gen_ = 1;
    }
  }

  std::uint32_t next_edge_stamp() {
    if (++edge_gen_ == 0) {
      std::fill(path_stamp_.begin(), path_stamp_.end(), 0);
      std::fill(buf_stamp_.begin(), buf_stamp_.end(), 0);
      edge_gen_ = 1;
    }
    return edge_gen_;
  }

  bool known(CellIndex i) const { return node_gen_[i] == search_gen_; }
  bool closed(CellIndex i) const { return closed_gen_[i] == search_gen_; }
  void close(CellIndex i) { closed_gen_[i] = search_gen_; }
  void touch(CellIndex i) {
    if (!known(i)) {
      node_gen_[i] = search_gen_;
      g_[i] = std::numeric_limits<double>::infinity();
      parent_[i] = -1;
    }
  }
  double& g(CellIndex i) { return g_[i]; }
  CellIndex& parent(CellIndex i) { return parent_[i]; }

  std::vector<std::uint32_t>& path_stamp() { return path_stamp_; }
  std::vector<std::uint32_t>& buf_stamp() { return buf_stamp_; }
  std::vector<CellIndex>& new_path() { return new_path_; }
  std::vector<CenterSegment>& nearby() { return nearby_; }

  /// Marks path cells and path+buffer footprint of a segment chain; `end`
  /// identifies the chain so repeated requests are free.
  void mark_chain(const GridGraph& grid, const RouteGeometry& geo, std::span<const CenterSegment> chain,
                  CellIndex end) {
    if (end == marked_end_) return;
    marked_end_ = end;
    if (++chain_gen_ == 0) {
      std::fill(chain_path_.begin(), chain_path_.end(), 0);
      std::fill(chain_foot_.begin(), chain_foot_.end(), 0);
      chain_gen_ = 1;
    }
    const Axes& r = geo.buffer_radius;
    for (const CenterSegment& s : chain) {
      const CellCoord a{static_cast<int>((s.start[0] - 1) / 2), static_cast<int>((s.start[1] - 1) / 2),
                        static_cast<int>((s.start[2] - 1) / 2)};
      const CellCoord b{a.x + static_cast<int>(s.delta[0] / 2), a.y + static_cast<int>(s.delta[1] / 2),
                        a.z + static_cast<int>(s.delta[2] / 2)};
      for_each_traced_cell(a, b, [&](CellCoord c) {
        for_each_block_cell(grid, c, geo.thickness, [&](CellIndex y) {
          if (chain_path_[y] == chain_gen_) return true;
          chain_path_[y] = chain_gen_;
          const CellCoord cy = grid.coord(y);
          for (int dz = -r[2]; dz <= r[2]; ++dz) {
            for (int dy = -r[1]; dy <= r[1]; ++dy) {
              for (int dx = -r[0]; dx <= r[0]; ++dx) {
                const CellCoord q{cy.x + dx, cy.y + dy, cy.z + dz};
                if (grid.in_bounds(q)) chain_foot_[grid.index(q)] = chain_gen_;
              }
            }
          }
          return true;
        });
        return true;
      });
    }
  }
  const std::vector<std::uint32_t>& chain_path() const { return chain_path_; }
  const std::vector<std::uint32_t>& chain_foot() const { return chain_foot_; }
  std::uint32_t chain_gen() const { return chain_gen_; }

  /// Counters of the last search.
  std::size_t expanded = 0;
  std::size_t edges_costed = 0;

 private:
  std::vector<double> g_;
  std::vector<CellIndex> parent_;
  std::vector<std::uint32_t> node_gen_;
  std::vector<std::uint32_t> closed_gen_;
  std::vector<std::uint32_t> path_stamp_;
  std::vector<std::uint32_t> buf_stamp_;
  std::uint32_t search_gen_ = 0;
  std::uint32_t edge_gen_ = 0;
  std::vector<CellIndex> new_path_;
  std::vector<CenterSegment> nearby_;
  std::vector<std::uint32_t> chain_path_;
  std::vector<std::uint32_t> chain_foot_;
  std::uint32_t chain_gen_ = 0;
  CellIndex marked_end_ = -1;
};

namespace detail {

/// Path cells already laid down by a partial path, as center segments.
/// Cell x is a path cell iff a segment touches the anchor range
/// [x - (t-1), x]; it is within the partial path's footprint (path plus
/// buffer) iff a segment touches [x - (t-1) - r, x + r].
struct ChainView {
  std::span<const CenterSegment> segments;
  Axes thickness{1, 1, 1};
  Axes radius{1, 1, 1};

  bool is_path(CellCoord x) const {
    std::array<int, 3> lo{}, hi{};
    for (int a = 0; a < 3; ++a) {
      lo[a] = x[a] - (thickness[a] - 1);
      hi[a] = x[a];
    }
    return touches(lo, hi);
  }
  bool is_counted(CellCoord x) const {
    std::array<int, 3> lo{}, hi{};
    for (int a = 0; a < 3; ++a) {
      lo[a] = x[a] - (thickness[a] - 1) - radius[a];
      hi[a] = x[a] + radius[a];
    }
    return touches(lo, hi);
  }
  bool touches(const std::array<int, 3>& lo, const std::array<int, 3>& hi) const {
    for (const CenterSegment& s : segments) {
      if (s.touches(lo, hi)) return true;
    }
    return false;
  }
};

/// Chain membership from cells marked in the workspace (the chain ending at
/// some node) plus at most one extra segment tested exactly.
struct MarkedChain {
  const std::vector<std::uint32_t>* path_mark;
  const std::vector<std::uint32_t>* foot_mark;
  std::uint32_t gen;
  const CenterSegment* extra;
  Axes thickness{1, 1, 1};
  Axes radius{1, 1, 1};

  bool is_path(CellCoord x, CellIndex i) const {
    if ((*path_mark)[i] == gen) return true;
    if (!extra) return false;
    return ChainView{{extra, 1}, thickness, radius}.is_path(x);
  }
  bool is_counted(CellCoord x, CellIndex i) const {
    if ((*foot_mark)[i] == gen) return true;
    if (!extra) return false;
    return ChainView{{extra, 1}, thickness, radius}.is_counted(x);
  }
};

struct SlabChain {
  ChainView view;
  bool is_path(CellCoord x, CellIndex) const { return view.is_path(x); }
  bool is_counted(CellCoord x, CellIndex) const { return view.is_counted(x); }
};

inline double edge_operational(const GridGraph& grid, CellIndex prev, CellIndex a, CellIndex b,
                               const CostWeights& w) {
  const Vec3 l = grid.center(b) - grid.center(a);
  double cost = segment_operational(l, w);
  if (prev >= 0 && w.lambda_turning > 0.0) {
    const Vec3 before = grid.center(a) - grid.center(prev);
    if (norm(before) > 0.0 && norm(l) > 0.0) cost += w.lambda_turning * turning_angle(before, l);
  }
  return cost;
}

/// Cost of appending a→b to a partial path whose last waypoint is `a`.
/// `prev` is the waypoint before `a` (for the turning angle), or -1.
/// `chain` answers whether a cell is already a path cell of the partial path
/// or inside its path+buffer footprint.
template <class Chain>
EdgeCost edge_cost_with(const OccupancyOverlay& overlay, const Chain& chain, CellIndex prev, CellIndex a,
                        CellIndex b, const CostWeights& w, bool with_risk, bool with_space, SearchWorkspace& ws) {
  const GridGraph& grid = overlay.grid();
  const RouteGeometry& geo = overlay.geometry();
  EdgeCost out;
  out.operational = edge_operational(grid, prev, a, b, w);
  if (!with_risk && !with_space) return out;

  const std::uint32_t stamp = ws.next_edge_stamp();
  auto& pstamp = ws.path_stamp();
  auto& bstamp = ws.buf_stamp();
  std::vector<CellIndex>& fresh = ws.new_path();
  fresh.clear();
  double n_path = 0.0;
  for_each_traced_cell(grid.coord(a), grid.coord(b), [&](CellCoord c) {
    for_each_block_cell(grid, c, geo.thickness, [&](CellIndex y) {
      if (pstamp[y] == stamp) return true;
      pstamp[y] = stamp;
      const CellCoord cy = grid.coord(y);
      if (chain.is_path(cy, y)) return true;
      fresh.push_back(y);
      out.raw_risk += grid.theta(y);
      // A reserved or foreign path cell in the chain's footprint was never
      // counted as buffer.
      if (with_space && (!chain.is_counted(cy, y) || overlay.buffer_reserved(y) || overlay.path_occupied(y))) {
        n_path += 1.0;
      }
      return true;
    });
    return true;
  });
  if (!with_space) return out;

  double n_buf = 0.0;
  const Axes& r = geo.buffer_radius;
  const int nx = grid.nx();
  const int nxy = grid.nx() * grid.ny();
  // Neighbourhood boxes of consecutive fresh cells overlap heavily; rows
  // already covered by the previous box are skipped (their cells were
  // visited then).
  std::array<int, 3> plo{1, 1, 1}, phi{0, 0, 0};
  auto visit_row = [&](int xa, int xb, int yy, int z) {
    CellIndex zi = xa + nx * yy + nxy * z;
    for (int x = xa; x <= xb; ++x, ++zi) {
      if (bstamp[zi] == stamp) continue;
      bstamp[zi] = stamp;
      if (pstamp[zi] == stamp) continue;
      if (overlay.buffer_reserved(zi) || overlay.path_occupied(zi)) continue;
      if (chain.is_counted({x, yy, z}, zi)) continue;
      n_buf += 1.0;
    }
  };
  for (CellIndex y : fresh) {
    const CellCoord cy = grid.coord(y);
    const std::array<int, 3> lo{std::max(cy.x - r[0], 0), std::max(cy.y - r[1], 0), std::max(cy.z - r[2], 0)};
    const std::array<int, 3> hi{std::min(cy.x + r[0], grid.nx() - 1), std::min(cy.y + r[1], grid.ny() - 1),
                                std::min(cy.z + r[2], grid.nz() - 1)};
    for (int z = lo[2]; z <= hi[2]; ++z) {
      for (int yy = lo[1]; yy <= hi[1]; ++yy) {
        const bool covered_row = z >= plo[2] && z <= phi[2] && yy >= plo[1] && yy <= phi[1];
        if (!covered_row) {
          visit_row(lo[0], hi[0], yy, z);
          continue;
        }
        if (lo[0] < plo[0]) visit_row(lo[0], std::min(hi[0], plo[0] - 1), yy, z);
        if (hi[0] > phi[0]) visit_row(std::max(lo[0], phi[0] + 1), hi[0], yy, z);
      }
    }
    plo = lo;
    phi = hi;
  }
  out.raw_space = n_path + n_buf;
  return out;
}

/// edge_cost_with over an explicit segment list, filtered to the segments
/// near the edge.
inline EdgeCost edge_cost(const OccupancyOverlay& overlay, std::span<const CenterSegment> chain,
                          CellIndex prev, CellIndex a, CellIndex b, const CostWeights& w,
                          bool with_risk, bool with_space, SearchWorkspace& ws) {
  if (!with_risk && !with_space) {
    EdgeCost out;
    out.operational = edge_operational(overlay.grid(), prev, a, b, w);
    return out;
  }
  const GridGraph& grid = overlay.grid();
  const RouteGeometry& geo = overlay.geometry();
  const CellCoord ca = grid.coord(a);
  const CellCoord cb = grid.coord(b);
  std::vector<CenterSegment>& nearby = ws.nearby();
  nearby.clear();
  std::array<std::int64_t, 3> lo{}, hi{};
  for (int i = 0; i < 3; ++i) {
    const std::int64_t reach = 2 * static_cast<std::int64_t>(2 * geo.buffer_radius[i] + geo.thickness[i] + 1);
    lo[i] = 2 * static_cast<std::int64_t>(std::min(ca[i], cb[i])) + 1 - reach;
    hi[i] = 2 * static_cast<std::int64_t>(std::max(ca[i], cb[i])) + 1 + reach;
  }
  for (const CenterSegment& s : chain) {
    bool overlap = true;
    for (int i = 0; i < 3 && overlap; ++i) overlap = s.hi[i] >= lo[i] && s.lo[i] <= hi[i];
    if (overlap) nearby.push_back(s);
  }
  const SlabChain view{ChainView{nearby, geo.thickness, geo.buffer_radius}};
  return edge_cost_with(overlay, view, prev, a, b, w, with_risk, with_space, ws);
}

inline std::vector<CenterSegment> chain_segments(const GridGraph& grid, std::span<const CellIndex> waypoints) {
  std::vector<CenterSegment> segs;
  if (waypoints.size() == 1) segs.emplace_back(grid.coord(waypoints[0]), grid.coord(waypoints[0]));
  for (std::size_t i = 1; i < waypoints.size(); ++i) {
    segs.emplace_back(grid.coord(waypoints[i - 1]), grid.coord(waypoints[i]));
  }
  return segs;
}

}  // namespace detail

/// λ_r · Σθ over the thickened supercover of a→b.
inline double risk_cost(const OccupancyOverlay& overlay, CellIndex a, CellIndex b, const CostWeights& w) {
  SearchWorkspace ws;
  ws.prepare(overlay.grid().size());
  return w.lambda_r * detail::edge_cost(overlay, {}, -1, a, b, w, true, false, ws).raw_risk;
}

/// λ_p · (new path cells + new buffer cells) for a→b, marginal with respect
/// to the overlay and to the cells of `prior` (a partial path ending at a).
inline double space_cost(const OccupancyOverlay& overlay, CellIndex a, CellIndex b, const CostWeights& w,
                         std::span<const CellIndex> prior = {}) {
  if (!prior.empty() && prior.back() != a) throw std::invalid_argument("space_cost: prior path must end at a");
  SearchWorkspace ws;
  ws.prepare(overlay.grid().size());
  const auto chain = detail::chain_segments(overlay.grid(), prior);
  return w.lambda_p * detail::edge_cost(overlay, chain, -1, a, b, w, false, true, ws).raw_space;
}

struct RouteEvaluation {
  CostBreakdown cost;
  double raw_risk = 0.0;
  double raw_space = 0.0;
};

/// Replays a waypoint chain edge by edge with the same arithmetic the search
/// uses, so totals match the search's g value exactly.
inline RouteEvaluation evaluate_route(const OccupancyOverlay& overlay, std::span<const CellIndex> waypoints,
                                      const CostWeights& w, SearchWorkspace* workspace = nullptr) {
  SearchWorkspace local;
  SearchWorkspace& ws = workspace ? *workspace : local;
  if (ws.path_stamp().size() != overlay.grid().size()) ws.prepare(overlay.grid().size());
  RouteEvaluation ev;
  std::vector<CenterSegment> chain;
  for (std::size_t i = 1; i < waypoints.size(); ++i) {
    const CellIndex prev = i >= 2 ? waypoints[i - 2] : -1;
    const EdgeCost e =
        detail::edge_cost(overlay, chain, prev, waypoints[i - 1], waypoints[i], w, true, true, ws);
    ev.cost.total = ev.cost.total + e.total(w);
    ev.cost.operational += e.operational;
    ev.raw_risk += e.raw_risk;
    ev.raw_space += e.raw_space;
    chain.emplace_back(overlay.grid().coord(waypoints[i - 1]), overlay.grid().coord(waypoints[i]));
  }
  ev.cost.risk = w.lambda_r * ev.raw_risk;
  ev.cost.space = w.lambda_p * ev.raw_space;
  return ev;
}

/// Builds a Route (cells, buffer, costs) from a waypoint chain.
inline Route make_route(const OccupancyOverlay& overlay, std::vector<CellIndex> waypoints, const CostWeights& w,
                        SearchWorkspace* workspace = nullptr) {
  Route route;
  const RouteEvaluation ev = evaluate_route(overlay, waypoints, w, workspace);
  route.path_cells = polyline_cells(overlay.grid(), waypoints, overlay.geometry().thickness);
  route.buffer_cells = buffer_cells(route.path_cells, overlay.grid(), overlay.geometry().buffer_radius);
  route.waypoints = std::move(waypoints);
  route.cost = ev.cost;
  route.raw_risk = ev.raw_risk;
  route.raw_space = ev.raw_space;
  route.lambda_r = w.lambda_r;
  route.lambda_p = w.lambda_p;
  return route;
}

namespace detail {

struct OpenEntry {
  double f;
  double g;
  CellIndex cell;
};

// Min-heap order: smaller f, then larger g, then smaller index.
struct OpenAfter {
  bool operator()(const OpenEntry& a, const OpenEntry& b) const {
    if (a.f != b.f) return a.f > b.f;
    if (a.g != b.g) return a.g < b.g;
    return a.cell > b.cell;
  }
};

inline int neighbour_offsets(const GridGraph& grid, std::array<CellCoord, 26>& out) {
  int n = 0;
  const int zr = grid.single_layer() ? 0 : 1;
  for (int dz = -zr; dz <= zr; ++dz) {
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        if (dx == 0 && dy == 0 && dz == 0) continue;
        out[n++] = {dx, dy, dz};
      }
    }
  }
  return n;
}

}  // namespace detail

/// Extended Theta* between two cells. Throws NoPathError.
inline Route find_path(const OccupancyOverlay& overlay, CellIndex start, CellIndex goal, const CostWeights& w,
                       const SearchOptions& opts = {}, SearchWorkspace* workspace = nullptr) {
  const GridGraph& grid = overlay.grid();
  const auto valid = [&](CellIndex c) {
    return c >= 0 && static_cast<std::size_t>(c) < grid.size() && line_of_sight(overlay, c, c);
  };
  if (!valid(start)) throw NoPathError(NoPathError::Reason::InvalidEndpoint, "start cell is not free");
  if (!valid(goal)) throw NoPathError(NoPathError::Reason::InvalidEndpoint, "goal cell is not free");

  SearchWorkspace local;
  SearchWorkspace& ws = workspace ? *workspace : local;
  ws.prepare(grid.size());
  ws.expanded = 0;
  ws.edges_costed = 0;
  if (start == goal) return make_route(overlay, {start}, w, &ws);

  const bool with_risk = w.omega_r > 0.0;
  const bool with_space = w.omega_p > 0.0;
  const double hw = opts.heuristic_weight * (opts.normalized_heuristic ? 1.0 + w.omega_r + w.omega_p : 1.0);
  std::array<CellCoord, 26> offsets{};
  const int n_offsets = detail::neighbour_offsets(grid, offsets);

  std::priority_queue<detail::OpenEntry, std::vector<detail::OpenEntry>, detail::OpenAfter> open;
  ws.touch(start);
  ws.g(start) = 0.0;
  ws.parent(start) = start;
  open.push({hw * heuristic(grid, start, goal), 0.0, start});

  std::vector<CellIndex> trail;
  std::vector<CenterSegment> chain_parent;  // chain ending at parent(s')

  auto build_chain = [&](CellIndex end, std::vector<CenterSegment>& out) {
    trail.clear();
    for (CellIndex c = end; c != start; c = ws.parent(c)) trail.push_back(c);
    trail.push_back(start);
    out.clear();
    for (std::size_t i = trail.size() - 1; i > 0; --i) {
      out.emplace_back(grid.coord(trail[i]), grid.coord(trail[i - 1]));
    }
  };

  while (!open.empty()) {
    const detail::OpenEntry top = open.top();
    open.pop();
    const CellIndex sp = top.cell;
    if (ws.closed(sp) || top.g != ws.g(sp)) continue;
    if (sp == goal) break;
    ws.close(sp);
    ++ws.expanded;

    const CellIndex par = ws.parent(sp);
    const bool need_chain = with_risk || with_space;
    CenterSegment last_leg;
    if (need_chain) {
      build_chain(par, chain_parent);
      ws.mark_chain(grid, overlay.geometry(), chain_parent, par);
      if (par != sp) last_leg = CenterSegment(grid.coord(par), grid.coord(sp));
    }
    const detail::MarkedChain parent_view{&ws.chain_path(), &ws.chain_foot(), ws.chain_gen(), nullptr,
                                          overlay.geometry().thickness, overlay.geometry().buffer_radius};
    detail::MarkedChain self_view = parent_view;
    if (par != sp) self_view.extra = &last_leg;
    const CellIndex par_prev = par != start ? ws.parent(par) : -1;
    const CellIndex sp_prev = sp != start ? par : -1;

    const CellCoord cs = grid.coord(sp);
    for (int k = 0; k < n_offsets; ++k) {
      const CellCoord q{cs.x + offsets[k].x, cs.y + offsets[k].y, cs.z + offsets[k].z};
      if (!grid.in_bounds(q)) continue;
      const CellIndex s = grid.index(q);
      if (ws.closed(s)) continue;
      if (!line_of_sight(overlay, sp, s)) continue;
      ws.touch(s);

      CellIndex from = sp;
      const detail::MarkedChain* chain = &self_view;
      CellIndex prev = sp_prev;
      if (opts.any_angle && par != sp && line_of_sight(overlay, par, s)) {
        from = par;
        chain = &parent_view;
        prev = par_prev;
      }
      const double g_from = ws.g(from);
      // Operational cost first; risk and space are non-negative, so the edge
      // can be discarded before the cell-level work.
      EdgeCost e;
      e.operational = detail::edge_operational(grid, prev, from, s, w);
      if (g_from + e.operational >= ws.g(s)) continue;
      ++ws.edges_costed;
      if (need_chain) e = detail::edge_cost_with(overlay, *chain, prev, from, s, w, with_risk, with_space, ws);
      const double g_new = g_from + e.total(w);
      if (g_new < ws.g(s)) {
        ws.g(s) = g_new;
        ws.parent(s) = from;
        open.push({g_new + hw * heuristic(grid, s, goal), g_new, s});
      }
    }
  }

  if (!ws.known(goal) || !std::isfinite(ws.g(goal))) {
    throw NoPathError(NoPathError::Reason::Exhausted, "no path found");
  }
  std::vector<CellIndex> waypoints;
  for (CellIndex c = goal; c != start; c = ws.parent(c)) waypoints.push_back(c);
  waypoints.push_back(start);
  std::reverse(waypoints.begin(), waypoints.end());
  return make_route(overlay, std::move(waypoints), w, &ws);
}

/// Landing area of vertiport `v`: the anchor cell first, then every in-bounds
/// cell whose center lies within the radius. Empty if the anchor is outside.
inline std::vector<CellIndex> vertiport_cells(const GridGraph& grid, const Vertiport& v) {
  const Vec3 anchor = vertiport_anchor(grid, v);
  const auto home = grid.locate(anchor);
  if (!home) return {};
  const CellIndex h = grid.index(*home);
  std::vector<CellIndex> out{h};
  if (v.radius <= 0.0) return out;
  Axes reach{};
  for (int a = 0; a < 3; ++a) reach[a] = static_cast<int>(std::ceil(v.radius / grid.cell_size()[a])) + 1;
  for (int dz = -reach[2]; dz <= reach[2]; ++dz) {
    for (int dy = -reach[1]; dy <= reach[1]; ++dy) {
      for (int dx = -reach[0]; dx <= reach[0]; ++dx) {
        const CellCoord c{home->x + dx, home->y + dy, home->z + dz};
        if (!grid.in_bounds(c)) continue;
        const CellIndex i = grid.index(c);
        if (i != h && norm(grid.center(i) - anchor) <= v.radius) out.push_back(i);
      }
    }
  }
  return out;
}

/// Free cell for a route endpoint at vertiport `v`: the cell nearest the
/// vertiport anchor within its radius that can host a path cell; ties by index.
inline std::optional<CellIndex> resolve_endpoint(const OccupancyOverlay& overlay, const Vertiport& v) {
  const GridGraph& grid = overlay.grid();
  const Vec3 anchor = vertiport_anchor(grid, v);
  const std::vector<CellIndex> area = vertiport_cells(grid, v);
  if (area.empty()) return std::nullopt;
  if (line_of_sight(overlay, area[0], area[0])) return area[0];
  std::optional<CellIndex> best;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t k = 1; k < area.size(); ++k) {
    const CellIndex i = area[k];
    if (!line_of_sight(overlay, i, i)) continue;
    const double d = norm(grid.center(i) - anchor);
    if (d < best_d || (d == best_d && i < *best)) {
      best = i;
      best_d = d;
    }
  }
  return best;
}

/// Scaling factors from a pure-operational baseline path on an empty overlay:
/// λ_r = o0 / r0, λ_p = o0 / p0.
inline std::pair<double, double> calibrate_lambdas(const GridGraph& grid, CellIndex start, CellIndex goal,
                                                   const CostWeights& w, const RouteGeometry& geometry = {},
                                                   SearchWorkspace* workspace = nullptr) {
  if (start == goal) throw CalibrationError("calibration needs distinct endpoints");
  OccupancyOverlay empty(grid, geometry);
  CostWeights base = w;
  base.omega_r = 0.0;
  base.omega_p = 0.0;
  base.lambda_r = 1.0;
  base.lambda_p = 1.0;
  Route r;
  try {
    r = find_path(empty, start, goal, base, {}, workspace);
  } catch (const NoPathError& e) {
    throw CalibrationError(std::string("baseline search failed: ") + e.what());
  }
  const double o0 = r.cost.operational;
  if (!(o0 > 0.0) || !(r.raw_risk > 0.0) || !(r.raw_space > 0.0)) {
    throw CalibrationError("degenerate baseline path, cannot normalize");
  }
  return {o0 / r.raw_risk, o0 / r.raw_space};
}

}  // namespace tubenet

#endif  // TUBENET_PATHFINDER_HPP
