#ifndef TUBENET_GEOMETRY_HPP
#define TUBENET_GEOMETRY_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

namespace tubenet {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Vec2&, const Vec2&) = default;
};

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  double operator[](std::size_t i) const { return i == 0 ? x : (i == 1 ? y : z); }
  double& operator[](std::size_t i) { return i == 0 ? x : (i == 1 ? y : z); }

  friend Vec3 operator+(Vec3 a, Vec3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
  friend Vec3 operator-(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
  friend Vec3 operator*(double s, Vec3 a) { return {s * a.x, s * a.y, s * a.z}; }
  friend bool operator==(const Vec3&, const Vec3&) = default;
};

inline double dot(Vec3 a, Vec3 b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline double norm(Vec3 a) { return std::sqrt(dot(a, a)); }

struct Box3 {
  Vec3 min;
  Vec3 max;

  bool contains(Vec3 p) const {
    return p.x >= min.x && p.x <= max.x && p.y >= min.y && p.y <= max.y && p.z >= min.z &&
           p.z <= max.z;
  }
  friend bool operator==(const Box3&, const Box3&) = default;
};

/// Axis-aligned rectangle in the horizontal plane (closed).
struct Rect {
  double x0, y0, x1, y1;
};

using Polygon = std::vector<Vec2>;

inline double signed_area(const Polygon& poly) {
  double a = 0.0;
  for (std::size_t i = 0, n = poly.size(); i < n; ++i) {
    const Vec2& p = poly[i];
    const Vec2& q = poly[(i + 1) % n];
    a += p.x * q.y - q.x * p.y;
  }
  return 0.5 * a;
}

inline void make_counter_clockwise(Polygon& poly) {
  if (signed_area(poly) < 0.0) std::reverse(poly.begin(), poly.end());
}

namespace detail {

inline double cross(Vec2 o, Vec2 a, Vec2 b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

inline int orientation(Vec2 o, Vec2 a, Vec2 b) {
  const double c = cross(o, a, b);
  return (c > 0.0) - (c < 0.0);
}

inline bool on_segment(Vec2 p, Vec2 a, Vec2 b) {
  return std::min(a.x, b.x) <= p.x && p.x <= std::max(a.x, b.x) && std::min(a.y, b.y) <= p.y &&
         p.y <= std::max(a.y, b.y);
}

}  // namespace detail

/// Closed segment intersection (touching endpoints count).
inline bool segments_intersect(Vec2 p1, Vec2 p2, Vec2 q1, Vec2 q2) {
  using detail::on_segment;
  using detail::orientation;
  const int o1 = orientation(p1, p2, q1);
  const int o2 = orientation(p1, p2, q2);
  const int o3 = orientation(q1, q2, p1);
  const int o4 = orientation(q1, q2, p2);
  if (o1 != o2 && o3 != o4) return true;
  if (o1 == 0 && on_segment(q1, p1, p2)) return true;
  if (o2 == 0 && on_segment(q2, p1, p2)) return true;
  if (o3 == 0 && on_segment(p1, q1, q2)) return true;
  if (o4 == 0 && on_segment(p2, q1, q2)) return true;
  return false;
}

/// Non-self-intersecting check: no two non-adjacent edges touch and adjacent
/// edges meet only at their shared vertex.
inline bool is_simple_polygon(const Polygon& poly) {
  const std::size_t n = poly.size();
  if (n < 3) return false;
  for (std::size_t i = 0; i < n; ++i) {
    if (poly[i] == poly[(i + 1) % n]) return false;
  }
  if (std::abs(signed_area(poly)) <= 0.0) return false;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 a = poly[i];
    const Vec2 b = poly[(i + 1) % n];
    for (std::size_t j = i + 1; j < n; ++j) {
      const Vec2 c = poly[j];
      const Vec2 d = poly[(j + 1) % n];
      const bool adjacent = (j == i + 1) || (i == 0 && j == n - 1);
      if (!adjacent) {
        if (segments_intersect(a, b, c, d)) return false;
        continue;
      }
      // Adjacent edges: reject collinear fold-backs.
      const Vec2 shared = (j == i + 1) ? b : a;
      const Vec2 other_i = (j == i + 1) ? a : b;
      const Vec2 other_j = (j == i + 1) ? d : c;
      if (detail::orientation(shared, other_i, other_j) == 0) {
        const double dx1 = other_i.x - shared.x, dy1 = other_i.y - shared.y;
        const double dx2 = other_j.x - shared.x, dy2 = other_j.y - shared.y;
        if (dx1 * dx2 + dy1 * dy2 > 0.0) return false;
      }
    }
  }
  return true;
}

/// Point in polygon, boundary inclusive.
inline bool point_in_polygon(Vec2 p, const Polygon& poly) {
  const std::size_t n = poly.size();
  bool inside = false;
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Vec2 a = poly[i];
    const Vec2 b = poly[j];
    if (detail::orientation(a, b, p) == 0 && detail::on_segment(p, a, b)) return true;
    if ((a.y > p.y) != (b.y > p.y)) {
      const double x_cross = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
      if (p.x < x_cross) inside = !inside;
    }
  }
  return inside;
}

inline Rect bounding_rect(const Polygon& poly) {
  Rect r{poly.front().x, poly.front().y, poly.front().x, poly.front().y};
  for (const Vec2& p : poly) {
    r.x0 = std::min(r.x0, p.x);
    r.y0 = std::min(r.y0, p.y);
    r.x1 = std::max(r.x1, p.x);
    r.y1 = std::max(r.y1, p.y);
  }
  return r;
}

/// Closed intersection test between a simple polygon and a rectangle.
inline bool polygon_intersects_rect(const Polygon& poly, const Rect& r) {
  const Rect bb = bounding_rect(poly);
  if (bb.x1 < r.x0 || bb.x0 > r.x1 || bb.y1 < r.y0 || bb.y0 > r.y1) return false;
  for (const Vec2& p : poly) {
    if (p.x >= r.x0 && p.x <= r.x1 && p.y >= r.y0 && p.y <= r.y1) return true;
  }
  const Vec2 corners[4] = {{r.x0, r.y0}, {r.x1, r.y0}, {r.x1, r.y1}, {r.x0, r.y1}};
  for (const Vec2& c : corners) {
    if (point_in_polygon(c, poly)) return true;
  }
  for (std::size_t i = 0, n = poly.size(); i < n; ++i) {
    const Vec2 a = poly[i];
    const Vec2 b = poly[(i + 1) % n];
    for (int k = 0; k < 4; ++k) {
      if (segments_intersect(a, b, corners[k], corners[(k + 1) % 4])) return true;
    }
  }
  return false;
}

/// Equirectangular projection of a geodetic coordinate about an origin,
/// returning local east/north meters.
inline Vec2 project_equirectangular(double lat_deg, double lon_deg, double origin_lat_deg,
                                    double origin_lon_deg) {
  constexpr double kEarthRadius = 6371008.8;
  constexpr double kDeg = 3.14159265358979323846 / 180.0;
  const double east = (lon_deg - origin_lon_deg) * kDeg * std::cos(origin_lat_deg * kDeg);
  const double north = (lat_deg - origin_lat_deg) * kDeg;
  return {east * kEarthRadius, north * kEarthRadius};
}

}  // namespace tubenet

#endif  // TUBENET_GEOMETRY_HPP
