#ifndef TUBENET_GRID_HPP
#define TUBENET_GRID_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "tubenet/errors.hpp"
#include "tubenet/geometry.hpp"
#include "tubenet/scenario.hpp"

namespace tubenet {

using CellIndex = std::int32_t;

struct CellCoord {
  int x = 0;
  int y = 0;
  int z = 0;

  int operator[](int axis) const { return axis == 0 ? x : (axis == 1 ? y : z); }
  int& operator[](int axis) { return axis == 0 ? x : (axis == 1 ? y : z); }
  friend bool operator==(const CellCoord&, const CellCoord&) = default;
};

using Axes = std::array<int, 3>;

/// Cross-section and separation of a route, in cells per axis.
/// Path blocks extend from a traced cell towards +x/+y/+z by thickness-1.
struct RouteGeometry {
  Axes thickness{1, 1, 1};
  Axes buffer_radius{1, 1, 1};
};

struct DiscretizeOptions {
  Vec3 cell_size{10.0, 10.0, 10.0};
  /// Obstacles are inflated by this many cells on every side so that path
  /// cells keep the required clearance from structures.
  int obstacle_margin_cells = 1;
};

/// Immutable voxelization of a scenario. The z-range of the grid is the
/// flyable band, so every layer lies inside the band.
class GridGraph {
 public:
  GridGraph() = default;
  GridGraph(Axes dims, Vec3 cell_size, Vec3 origin)
      : dims_(dims),
        cell_size_(cell_size),
        origin_(origin),
        reachable_(static_cast<std::size_t>(dims[0]) * dims[1] * dims[2], 1),
        theta_(reachable_.size(), 1.0),
        vertiport_(reachable_.size(), -1) {}

  const Axes& dims() const { return dims_; }
  int nx() const { return dims_[0]; }
  int ny() const { return dims_[1]; }
  int nz() const { return dims_[2]; }
  std::size_t size() const { return reachable_.size(); }
  const Vec3& cell_size() const { return cell_size_; }
  const Vec3& origin() const { return origin_; }
  bool single_layer() const { return dims_[2] == 1; }

  bool in_bounds(CellCoord c) const {
    return c.x >= 0 && c.y >= 0 && c.z >= 0 && c.x < dims_[0] && c.y < dims_[1] && c.z < dims_[2];
  }
  CellIndex index(CellCoord c) const { return c.x + dims_[0] * (c.y + dims_[1] * c.z); }
  CellCoord coord(CellIndex i) const {
    const int x = i % dims_[0];
    const int rest = i / dims_[0];
    return {x, rest % dims_[1], rest / dims_[1]};
  }

  Vec3 center(CellCoord c) const {
    return {origin_.x + (c.x + 0.5) * cell_size_.x, origin_.y + (c.y + 0.5) * cell_size_.y,
            origin_.z + (c.z + 0.5) * cell_size_.z};
  }
  Vec3 center(CellIndex i) const { return center(coord(i)); }

  Box3 cell_box(CellCoord c) const {
    const Vec3 lo{origin_.x + c.x * cell_size_.x, origin_.y + c.y * cell_size_.y,
                  origin_.z + c.z * cell_size_.z};
    return {lo, lo + cell_size_};
  }

  /// Cell containing `p`, with points on the upper boundary mapped inward.
  std::optional<CellCoord> locate(Vec3 p) const {
    CellCoord c;
    for (int a = 0; a < 3; ++a) {
      const double u = (p[a] - origin_[a]) / cell_size_[a];
      if (u < 0.0 || u > dims_[a]) return std::nullopt;
      c[a] = std::min(static_cast<int>(std::floor(u)), dims_[a] - 1);
    }
    return c;
  }

  bool reachable(CellIndex i) const { return reachable_[i] != 0; }
  double theta(CellIndex i) const { return theta_[i]; }
  /// Vertiport id stored on the cell, if any.
  std::optional<std::string> vertiport_at(CellIndex i) const {
    if (vertiport_[i] < 0) return std::nullopt;
    return vertiport_ids_[static_cast<std::size_t>(vertiport_[i])];
  }
  std::optional<CellIndex> vertiport_cell(const std::string& id) const {
    auto it = vertiport_cells_.find(id);
    if (it == vertiport_cells_.end()) return std::nullopt;
    return it->second;
  }
  std::size_t reachable_count() const {
    return static_cast<std::size_t>(std::count(reachable_.begin(), reachable_.end(), 1));
  }

  void set_reachable(CellIndex i, bool r) { reachable_[i] = r ? 1 : 0; }
  void set_theta(CellIndex i, double t) { theta_[i] = t; }
  void set_vertiport(CellIndex i, const std::string& id) {
    vertiport_[i] = static_cast<std::int32_t>(vertiport_ids_.size());
    vertiport_ids_.push_back(id);
    vertiport_cells_[id] = i;
  }

 private:
  Axes dims_{0, 0, 0};
  Vec3 cell_size_{1, 1, 1};
  Vec3 origin_{};
  std::vector<std::uint8_t> reachable_;
  std::vector<double> theta_;
  std::vector<std::int32_t> vertiport_;
  std::vector<std::string> vertiport_ids_;
  std::unordered_map<std::string, CellIndex> vertiport_cells_;
};

/// Point of a vertiport after clamping its altitude into the flyable band.
inline Vec3 vertiport_anchor(const GridGraph& grid, const Vertiport& v) {
  Vec3 p = v.position;
  const double top = grid.origin().z + grid.nz() * grid.cell_size().z;
  p.z = std::clamp(p.z, grid.origin().z, top);
  return p;
}

inline GridGraph discretize(const Scenario& scenario, const DiscretizeOptions& opts = {}) {
  const Vec3 cs = opts.cell_size;
  if (!(cs.x > 0.0 && cs.y > 0.0 && cs.z > 0.0)) throw GridError("cell size must be positive");
  if (opts.obstacle_margin_cells < 0) throw GridError("obstacle margin must be >= 0");

  const Box3& bb = scenario.bounding_box;
  const Vec3 origin{bb.min.x, bb.min.y, scenario.flyable_band.z_min};
  const Vec3 extent{bb.max.x - bb.min.x, bb.max.y - bb.min.y,
                    scenario.flyable_band.z_max - scenario.flyable_band.z_min};
  Axes dims{};
  for (int a = 0; a < 3; ++a) {
    const double cells = std::ceil(extent[a] / cs[a] - 1e-9);
    dims[a] = cells > 0.0 ? static_cast<int>(cells) : 0;
  }
  if (dims[0] <= 0 || dims[1] <= 0 || dims[2] <= 0) {
    throw GridError("empty flyable band after discretization");
  }
  GridGraph grid(dims, cs, origin);

  // Cell boxes are shrunk by a tiny tolerance so that a polygon or prism that
  // only touches a cell face does not claim the neighbouring cell.
  const double m = opts.obstacle_margin_cells;
  const Vec3 shrink{cs.x * 1e-9, cs.y * 1e-9, cs.z * 1e-9};
  const double band_top = origin.z + dims[2] * cs.z;

  for (const ObstaclePrism& ob : scenario.obstacles) {
    const double lo = ob.lowest_alt - m * cs.z;
    const double hi = ob.highest_alt + m * cs.z;
    if (hi <= origin.z || lo >= band_top) continue;
    int k0 = dims[2], k1 = -1;
    for (int k = 0; k < dims[2]; ++k) {
      const double z0 = origin.z + k * cs.z + shrink.z;
      const double z1 = origin.z + (k + 1) * cs.z - shrink.z;
      if (z1 >= lo && z0 <= hi) {
        k0 = std::min(k0, k);
        k1 = std::max(k1, k);
      }
    }
    if (k1 < k0) continue;
    const Rect fb = bounding_rect(ob.footprint);
    const int i0 = std::max(0, static_cast<int>(std::floor((fb.x0 - origin.x) / cs.x - m)) - 1);
    const int i1 = std::min(dims[0] - 1, static_cast<int>(std::floor((fb.x1 - origin.x) / cs.x + m)) + 1);
    const int j0 = std::max(0, static_cast<int>(std::floor((fb.y0 - origin.y) / cs.y - m)) - 1);
    const int j1 = std::min(dims[1] - 1, static_cast<int>(std::floor((fb.y1 - origin.y) / cs.y + m)) + 1);
    for (int j = j0; j <= j1; ++j) {
      for (int i = i0; i <= i1; ++i) {
        const Rect r{origin.x + (i - m) * cs.x + shrink.x, origin.y + (j - m) * cs.y + shrink.y,
                     origin.x + (i + 1 + m) * cs.x - shrink.x,
                     origin.y + (j + 1 + m) * cs.y - shrink.y};
        if (!polygon_intersects_rect(ob.footprint, r)) continue;
        for (int k = k0; k <= k1; ++k) grid.set_reachable(grid.index({i, j, k}), false);
      }
    }
  }

  std::vector<std::uint8_t> zoned(grid.size(), 0);
  for (const RiskZone& zone : scenario.risk_zones) {
    const Rect fb = bounding_rect(zone.footprint);
    const int i0 = std::max(0, static_cast<int>(std::floor((fb.x0 - origin.x) / cs.x)) - 1);
    const int i1 = std::min(dims[0] - 1, static_cast<int>(std::floor((fb.x1 - origin.x) / cs.x)) + 1);
    const int j0 = std::max(0, static_cast<int>(std::floor((fb.y0 - origin.y) / cs.y)) - 1);
    const int j1 = std::min(dims[1] - 1, static_cast<int>(std::floor((fb.y1 - origin.y) / cs.y)) + 1);
    for (int j = j0; j <= j1; ++j) {
      for (int i = i0; i <= i1; ++i) {
        const Vec2 c{origin.x + (i + 0.5) * cs.x, origin.y + (j + 0.5) * cs.y};
        if (!point_in_polygon(c, zone.footprint)) continue;
        for (int k = 0; k < dims[2]; ++k) {
          const CellIndex idx = grid.index({i, j, k});
          grid.set_theta(idx, zoned[idx] ? std::max(grid.theta(idx), zone.theta_risk) : zone.theta_risk);
          zoned[idx] = 1;
        }
      }
    }
  }

  for (const Vertiport& v : scenario.vertiports) {
    if (auto c = grid.locate(vertiport_anchor(grid, v))) grid.set_vertiport(grid.index(*c), v.id);
  }
  return grid;
}

// ---------------------------------------------------------------------------
// Supercover tracing

/// Visits every cell whose closed box is touched by the segment joining the
/// centers of `a` and `b`, ordered from a to b. Exact: works on doubled integer
/// coordinates, so corner and edge touches are detected without rounding.
/// `visit(CellCoord)` returns false to stop early; the function returns false
/// iff it was stopped.
template <class Visit>
bool for_each_traced_cell(CellCoord a, CellCoord b, Visit&& visit) {
  std::array<int, 3> step{};
  std::array<std::int64_t, 3> span{};  // |2(b-a)|
  std::array<std::int64_t, 3> next{};  // distance to next boundary, doubled units
  for (int i = 0; i < 3; ++i) {
    const int d = b[i] - a[i];
    step[i] = (d > 0) - (d < 0);
    span[i] = 2 * static_cast<std::int64_t>(std::abs(d));
    next[i] = 1;
  }
  CellCoord c = a;
  if (!visit(c)) return false;
  while (!(c == b)) {
    // Axes whose next boundary crossing comes first (ties cross together).
    int best = -1;
    for (int i = 0; i < 3; ++i) {
      if (step[i] == 0 || c[i] == b[i]) continue;
      if (best < 0 || next[i] * span[best] < next[best] * span[i]) best = i;
    }
    unsigned mask = 0;
    for (int i = 0; i < 3; ++i) {
      if (step[i] == 0 || c[i] == b[i]) continue;
      if (next[i] * span[best] == next[best] * span[i]) mask |= 1u << i;
    }
    if (std::popcount(mask) > 1) {
      // Cells touched only at the shared edge/corner, ordered by the number of
      // advanced axes and then by axis.
      static constexpr unsigned kOrder[] = {1, 2, 4, 3, 5, 6};
      for (unsigned sub : kOrder) {
        if ((sub & mask) != sub || sub == mask) continue;
        CellCoord t = c;
        for (int i = 0; i < 3; ++i) {
          if (sub & (1u << i)) t[i] += step[i];
        }
        if (!visit(t)) return false;
      }
    }
    for (int i = 0; i < 3; ++i) {
      if (mask & (1u << i)) {
        c[i] += step[i];
        next[i] += 2;
      }
    }
    if (!visit(c)) return false;
  }
  return true;
}

inline std::vector<CellIndex> trace_cells(const GridGraph& grid, CellIndex a, CellIndex b) {
  std::vector<CellIndex> out;
  for_each_traced_cell(grid.coord(a), grid.coord(b), [&](CellCoord c) {
    out.push_back(grid.index(c));
    return true;
  });
  return out;
}

/// Supercover of an arbitrary segment [a, b] in world coordinates: every cell
/// whose closed box the segment intersects, ordered from a to b.
inline std::vector<CellIndex> trace_cells(const GridGraph& grid, Vec3 a, Vec3 b) {
  constexpr double kTol = 1e-9;
  std::array<double, 3> ua{}, ub{}, d{};
  for (int i = 0; i < 3; ++i) {
    ua[i] = (a[i] - grid.origin()[i]) / grid.cell_size()[i];
    ub[i] = (b[i] - grid.origin()[i]) / grid.cell_size()[i];
    const int n = grid.dims()[i];
    if (ua[i] < -kTol || ua[i] > n + kTol || ub[i] < -kTol || ub[i] > n + kTol) {
      throw GridError("trace_cells: point outside grid bounds");
    }
    d[i] = ub[i] - ua[i];
  }

  auto near_center = [&](const std::array<double, 3>& u, CellCoord& c) {
    for (int i = 0; i < 3; ++i) {
      const double k = std::floor(u[i]);
      if (std::abs(u[i] - (k + 0.5)) > kTol) return false;
      c[i] = static_cast<int>(k);
    }
    return grid.in_bounds(c);
  };
  CellCoord ca, cb;
  if (near_center(ua, ca) && near_center(ub, cb)) return trace_cells(grid, grid.index(ca), grid.index(cb));

  // Event sweep: parameter values where the segment meets grid planes.
  std::vector<double> ts{0.0, 1.0};
  for (int i = 0; i < 3; ++i) {
    if (d[i] == 0.0) continue;
    const double lo = std::min(ua[i], ub[i]);
    const double hi = std::max(ua[i], ub[i]);
    for (double k = std::ceil(lo); k <= hi; k += 1.0) ts.push_back((k - ua[i]) / d[i]);
  }
  std::sort(ts.begin(), ts.end());
  std::vector<double> events;
  for (double t : ts) {
    t = std::clamp(t, 0.0, 1.0);
    if (events.empty() || t - events.back() > 1e-12) events.push_back(t);
  }

  // Orientation used to order cells that share an event point. Axes the
  // segment does not move along inherit the sign of the first moving axis so
  // that reversing the segment reverses the order.
  int lex = 1;
  for (int i = 0; i < 3; ++i) {
    if (d[i] != 0.0) {
      lex = d[i] > 0.0 ? 1 : -1;
      break;
    }
  }

  std::vector<CellIndex> out;
  std::vector<CellIndex> seen;
  struct Candidate {
    unsigned key;
    CellIndex idx;
  };
  std::vector<Candidate> batch;
  for (double t : events) {
    std::array<int, 3> lo_idx{}, hi_idx{};
    std::array<bool, 3> on_plane{};
    std::array<int, 3> ahead{};
    for (int i = 0; i < 3; ++i) {
      const double q = ua[i] + t * d[i];
      const double r = std::round(q);
      const int n = grid.dims()[i];
      if (std::abs(q - r) <= kTol) {
        on_plane[i] = true;
        lo_idx[i] = std::max(0, static_cast<int>(r) - 1);
        hi_idx[i] = std::min(n - 1, static_cast<int>(r));
        const int dir = d[i] > 0.0 ? 1 : (d[i] < 0.0 ? -1 : lex);
        ahead[i] = dir > 0 ? static_cast<int>(r) : static_cast<int>(r) - 1;
      } else {
        lo_idx[i] = hi_idx[i] = std::clamp(static_cast<int>(std::floor(q)), 0, n - 1);
      }
    }
    batch.clear();
    for (int z = lo_idx[2]; z <= hi_idx[2]; ++z) {
      for (int y = lo_idx[1]; y <= hi_idx[1]; ++y) {
        for (int x = lo_idx[0]; x <= hi_idx[0]; ++x) {
          const CellCoord c{x, y, z};
          unsigned mask = 0;
          for (int i = 0; i < 3; ++i) {
            if (on_plane[i] && c[i] == ahead[i]) mask |= 1u << i;
          }
          batch.push_back({(static_cast<unsigned>(std::popcount(mask)) << 3) | mask, grid.index(c)});
        }
      }
    }
    std::sort(batch.begin(), batch.end(), [](const Candidate& p, const Candidate& q) { return p.key < q.key; });
    for (const Candidate& cand : batch) {
      if (std::find(seen.begin(), seen.end(), cand.idx) != seen.end()) continue;
      seen.push_back(cand.idx);
      out.push_back(cand.idx);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Exact segment/box predicate on doubled integer coordinates

/// Segment between two cell centers, in doubled integer coordinates where the
/// center of cell k sits at 2k+1 and its faces at 2k and 2k+2.
struct CenterSegment {
  std::array<std::int64_t, 3> start{};
  std::array<std::int64_t, 3> delta{};
  std::array<std::int64_t, 3> lo{};  // AABB of the segment
  std::array<std::int64_t, 3> hi{};

  CenterSegment() = default;
  CenterSegment(CellCoord a, CellCoord b) {
    for (int i = 0; i < 3; ++i) {
      start[i] = 2 * static_cast<std::int64_t>(a[i]) + 1;
      delta[i] = 2 * static_cast<std::int64_t>(b[i] - a[i]);
      lo[i] = std::min(start[i], start[i] + delta[i]);
      hi[i] = std::max(start[i], start[i] + delta[i]);
    }
  }

  /// True iff the closed segment meets the closed box spanning cells
  /// [first, last] (inclusive, per axis).
  bool touches(const std::array<int, 3>& first, const std::array<int, 3>& last) const {
    std::int64_t tmin_n = 0, tmin_d = 1, tmax_n = 1, tmax_d = 1;
    for (int i = 0; i < 3; ++i) {
      const std::int64_t box_lo = 2 * static_cast<std::int64_t>(first[i]);
      const std::int64_t box_hi = 2 * static_cast<std::int64_t>(last[i]) + 2;
      if (hi[i] < box_lo || lo[i] > box_hi) return false;
      if (delta[i] == 0) continue;
      std::int64_t n1 = box_lo - start[i];
      std::int64_t n2 = box_hi - start[i];
      std::int64_t den = delta[i];
      if (den < 0) {
        n1 = -n1;
        n2 = -n2;
        den = -den;
        std::swap(n1, n2);
      }
      if (n1 * tmin_d > tmin_n * den) {
        tmin_n = n1;
        tmin_d = den;
      }
      if (n2 * tmax_d < tmax_n * den) {
        tmax_n = n2;
        tmax_d = den;
      }
      if (tmax_n * tmin_d < tmin_n * tmax_d) return false;
    }
    return true;
  }
};

// ---------------------------------------------------------------------------
// Route geometry helpers

/// Visits the thickened block of cells anchored at `c`. Returns false if part
/// of the block is out of bounds (the block is then unusable) or if `visit`
/// asked to stop.
template <class Visit>
bool for_each_block_cell(const GridGraph& grid, CellCoord c, const Axes& thickness, Visit&& visit) {
  if (thickness[0] == 1 && thickness[1] == 1 && thickness[2] == 1) return visit(grid.index(c));
  for (int dz = 0; dz < thickness[2]; ++dz) {
    for (int dy = 0; dy < thickness[1]; ++dy) {
      for (int dx = 0; dx < thickness[0]; ++dx) {
        const CellCoord q{c.x + dx, c.y + dy, c.z + dz};
        if (!grid.in_bounds(q)) return false;
        if (!visit(grid.index(q))) return false;
      }
    }
  }
  return true;
}

/// All in-bounds cells within per-axis Chebyshev distance `radius` of a path
/// cell, excluding the path cells. Sorted ascending.
inline std::vector<CellIndex> buffer_cells(std::span<const CellIndex> path_cells, const GridGraph& grid,
                                           const Axes& radius = {1, 1, 1}) {
  std::vector<CellIndex> path(path_cells.begin(), path_cells.end());
  std::sort(path.begin(), path.end());
  std::vector<CellIndex> out;
  for (CellIndex p : path) {
    const CellCoord c = grid.coord(p);
    for (int dz = -radius[2]; dz <= radius[2]; ++dz) {
      for (int dy = -radius[1]; dy <= radius[1]; ++dy) {
        for (int dx = -radius[0]; dx <= radius[0]; ++dx) {
          const CellCoord q{c.x + dx, c.y + dy, c.z + dz};
          if (grid.in_bounds(q)) out.push_back(grid.index(q));
        }
      }
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  std::vector<CellIndex> result;
  result.reserve(out.size());
  std::set_difference(out.begin(), out.end(), path.begin(), path.end(), std::back_inserter(result));
  return result;
}

/// Thickened supercover of a waypoint polyline, sorted ascending.
inline std::vector<CellIndex> polyline_cells(const GridGraph& grid, std::span<const CellIndex> waypoints,
                                             const Axes& thickness = {1, 1, 1}) {
  std::vector<CellIndex> out;
  auto add_block = [&](CellCoord c) {
    if (!for_each_block_cell(grid, c, thickness, [&](CellIndex i) {
          out.push_back(i);
          return true;
        })) {
      throw GridError("path block extends outside the grid");
    }
    return true;
  };
  if (waypoints.size() == 1) add_block(grid.coord(waypoints[0]));
  for (std::size_t i = 1; i < waypoints.size(); ++i) {
    for_each_traced_cell(grid.coord(waypoints[i - 1]), grid.coord(waypoints[i]), add_block);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

// ---------------------------------------------------------------------------
// Routes and occupancy

struct CostBreakdown {
  double operational = 0.0;
  double risk = 0.0;   // lambda_r-scaled
  double space = 0.0;  // lambda_p-scaled
  double total = 0.0;  // operational + omega_r * risk + omega_p * space
};

struct Route {
  std::string od_id;
  std::vector<CellIndex> waypoints;     // cell centers, start to goal
  std::vector<CellIndex> path_cells;    // sorted
  std::vector<CellIndex> buffer_cells;  // sorted, disjoint from path_cells
  CostBreakdown cost;
  double raw_risk = 0.0;   // sum of theta over path cells
  double raw_space = 0.0;  // marginal occupied cells when planned
  double lambda_r = 1.0;
  double lambda_p = 1.0;

  std::vector<Vec3> waypoint_positions(const GridGraph& grid) const {
    std::vector<Vec3> pts;
    pts.reserve(waypoints.size());
    for (CellIndex w : waypoints) pts.push_back(grid.center(w));
    return pts;
  }
};

/// Mutable reservation state for one planning sequence.
class OccupancyOverlay {
 public:
  static constexpr std::uint8_t kPath = 1;
  static constexpr std::uint8_t kBuffer = 2;

  explicit OccupancyOverlay(const GridGraph& grid, RouteGeometry geometry = {})
      : grid_(&grid), geometry_(geometry), flags_(grid.size(), 0) {}

  const GridGraph& grid() const { return *grid_; }
  const RouteGeometry& geometry() const { return geometry_; }

  bool path_occupied(CellIndex i) const { return (flags_[i] & kPath) != 0; }
  bool buffer_reserved(CellIndex i) const { return (flags_[i] & kBuffer) != 0; }
  /// Kept clear for a pending route endpoint; no path may enter it.
  bool held(CellIndex i) const { return !holds_.empty() && holds_[i] != 0; }
  /// Usable as a path cell by a later route.
  bool free_for_path(CellIndex i) const { return flags_[i] == 0 && !held(i) && grid_->reachable(i); }

  /// Holds are counted, so overlapping keep-out boxes release cleanly.
  void hold(std::span<const CellIndex> cells) {
    if (holds_.empty()) holds_.assign(grid_->size(), 0);
    for (CellIndex c : cells) ++holds_[c];
  }
  void release(std::span<const CellIndex> cells) {
    for (CellIndex c : cells) {
      if (holds_.empty() || holds_[c] == 0) throw std::logic_error("release of a cell that is not held");
      --holds_[c];
    }
  }

  std::size_t occupied_count() const { return occupied_; }
  std::size_t reserved_count() const { return reserved_; }

  /// Marks the route's path cells occupied and its buffer cells reserved.
  /// Re-applying the same route is a no-op.
  void apply(const Route& route) {
    const bool already = std::all_of(route.path_cells.begin(), route.path_cells.end(),
                                     [&](CellIndex c) { return path_occupied(c); }) &&
                         std::all_of(route.buffer_cells.begin(), route.buffer_cells.end(),
                                     [&](CellIndex c) { return buffer_reserved(c) || path_occupied(c); });
    if (already && !route.path_cells.empty()) return;
    for (CellIndex c : route.path_cells) {
      if (!grid_->reachable(c)) {
        throw RouteConflictError("route " + route.od_id + ": path cell " + std::to_string(c) +
                                 " is unreachable");
      }
      if (flags_[c] != 0) {
        throw RouteConflictError("route " + route.od_id + ": path cell " + std::to_string(c) +
                                 (path_occupied(c) ? " already occupied" : " inside a reserved buffer"));
      }
    }
    for (CellIndex c : route.path_cells) {
      flags_[c] |= kPath;
      ++occupied_;
    }
    for (CellIndex c : route.buffer_cells) {
      if (path_occupied(c)) {
        throw RouteConflictError("route " + route.od_id + ": buffer covers an occupied path cell " +
                                 std::to_string(c));
      }
      if (!buffer_reserved(c)) {
        flags_[c] |= kBuffer;
        ++reserved_;
      }
    }
  }

  friend bool operator==(const OccupancyOverlay& a, const OccupancyOverlay& b) {
    return a.grid_ == b.grid_ && a.flags_ == b.flags_;
  }

 private:
  const GridGraph* grid_;
  RouteGeometry geometry_;
  std::vector<std::uint8_t> flags_;
  std::vector<std::uint16_t> holds_;
  std::size_t occupied_ = 0;
  std::size_t reserved_ = 0;
};

inline void apply_route(OccupancyOverlay& overlay, const Route& route) { overlay.apply(route); }

/// True iff every cell on the thickened supercover between the two cell
/// centers is reachable, not held, not occupied by a path and (unless
/// `allow_reserved`) not inside a reserved buffer.
inline bool line_of_sight(const OccupancyOverlay& overlay, CellIndex a, CellIndex b,
                          bool allow_reserved = false) {
  const GridGraph& grid = overlay.grid();
  const Axes& thickness = overlay.geometry().thickness;
  return for_each_traced_cell(grid.coord(a), grid.coord(b), [&](CellCoord c) {
    return for_each_block_cell(grid, c, thickness, [&](CellIndex i) {
      if (!grid.reachable(i) || overlay.path_occupied(i) || overlay.held(i)) return false;
      return allow_reserved || !overlay.buffer_reserved(i);
    });
  });
}

/// Layered ASCII rendering: '#' unreachable, 'P' path, 'b' buffer, '.' free.
/// Row 0 of each layer is y = 0.
inline std::string dump_overlay_ascii(const OccupancyOverlay& overlay) {
  const GridGraph& g = overlay.grid();
  std::string out;
  for (int z = 0; z < g.nz(); ++z) {
    out += "layer " + std::to_string(z) + "\n";
    for (int y = 0; y < g.ny(); ++y) {
      for (int x = 0; x < g.nx(); ++x) {
        const CellIndex i = g.index({x, y, z});
        char ch = '.';
        if (overlay.path_occupied(i)) {
          ch = 'P';
        } else if (overlay.buffer_reserved(i)) {
          ch = 'b';
        } else if (!g.reachable(i)) {
          ch = '#';
        }
        out += ch;
      }
      out += '\n';
    }
  }
  return out;
}

}  // namespace tubenet

#endif  // TUBENET_GRID_HPP
