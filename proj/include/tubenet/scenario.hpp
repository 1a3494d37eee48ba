#ifndef TUBENET_SCENARIO_HPP
#define TUBENET_SCENARIO_HPP

#include <algorithm>
#include <cstddef>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "tubenet/errors.hpp"
#include "tubenet/geometry.hpp"

namespace tubenet {

enum class VertiportKind { OriginCapable, DestinationCapable, Both };

struct Vertiport {
  std::string id;
  Vec3 position;  // local ENU meters
  double radius = 0.0;
  VertiportKind kind = VertiportKind::Both;

  friend bool operator==(const Vertiport&, const Vertiport&) = default;
};

struct ObstaclePrism {
  std::string id;
  Polygon footprint;
  double lowest_alt = 0.0;
  double highest_alt = 0.0;

  friend bool operator==(const ObstaclePrism&, const ObstaclePrism&) = default;
};

struct RiskZone {
  std::string id;
  Polygon footprint;
  double theta_risk = 1.0;

  friend bool operator==(const RiskZone&, const RiskZone&) = default;
};

enum class Urgency { Urgent = 0, Important = 1, Normal = 2, Low = 3 };

struct ODRequest {
  std::string id;
  std::string origin_vertiport;
  std::string dest_vertiport;
  Urgency urgency = Urgency::Normal;
  double profit = 0.0;

  friend bool operator==(const ODRequest&, const ODRequest&) = default;
};

struct FlyableBand {
  double z_min = 0.0;
  double z_max = 0.0;

  friend bool operator==(const FlyableBand&, const FlyableBand&) = default;
};

struct Scenario {
  Box3 bounding_box;
  FlyableBand flyable_band;
  std::vector<Vertiport> vertiports;
  std::vector<ObstaclePrism> obstacles;
  std::vector<RiskZone> risk_zones;
  std::vector<ODRequest> od_requests;

  const Vertiport* find_vertiport(std::string_view id) const {
    for (const auto& v : vertiports) {
      if (v.id == id) return &v;
    }
    return nullptr;
  }

  friend bool operator==(const Scenario&, const Scenario&) = default;
};

inline std::string_view to_string(VertiportKind k) {
  switch (k) {
    case VertiportKind::OriginCapable: return "origin-capable";
    case VertiportKind::DestinationCapable: return "destination-capable";
    case VertiportKind::Both: return "both";
  }
  return "both";
}

inline std::string_view to_string(Urgency u) {
  switch (u) {
    case Urgency::Urgent: return "Urgent";
    case Urgency::Important: return "Important";
    case Urgency::Normal: return "Normal";
    case Urgency::Low: return "Low";
  }
  return "Normal";
}

inline std::optional<Urgency> parse_urgency(std::string_view s) {
  if (s == "Urgent") return Urgency::Urgent;
  if (s == "Important") return Urgency::Important;
  if (s == "Normal") return Urgency::Normal;
  if (s == "Low") return Urgency::Low;
  return std::nullopt;
}

inline std::optional<VertiportKind> parse_vertiport_kind(std::string_view s) {
  if (s == "origin-capable") return VertiportKind::OriginCapable;
  if (s == "destination-capable") return VertiportKind::DestinationCapable;
  if (s == "both") return VertiportKind::Both;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Validation

/// Checks every request against the scenario's vertiports. Order is preserved.
inline std::vector<ODRequest> validate_demand(const Scenario& scenario,
                                              std::vector<ODRequest> requests) {
  std::unordered_set<std::string> seen;
  for (const auto& r : requests) {
    if (r.id.empty()) throw ValidationError("od_requests", "request with empty id");
    if (!seen.insert(r.id).second) throw ValidationError(r.id, "duplicate request id");
    const Vertiport* o = scenario.find_vertiport(r.origin_vertiport);
    const Vertiport* d = scenario.find_vertiport(r.dest_vertiport);
    if (o == nullptr) {
      throw ValidationError(r.id, "unknown origin vertiport '" + r.origin_vertiport + "'");
    }
    if (d == nullptr) {
      throw ValidationError(r.id, "unknown destination vertiport '" + r.dest_vertiport + "'");
    }
    if (r.origin_vertiport == r.dest_vertiport) {
      throw ValidationError(r.id, "origin equals destination ('" + r.origin_vertiport + "')");
    }
    if (o->kind == VertiportKind::DestinationCapable) {
      throw ValidationError(r.id, "vertiport '" + o->id + "' cannot serve as an origin");
    }
    if (d->kind == VertiportKind::OriginCapable) {
      throw ValidationError(r.id, "vertiport '" + d->id + "' cannot serve as a destination");
    }
  }
  return requests;
}

/// Validates all scenario invariants in place and normalizes polygon
/// orientation to counter-clockwise.
inline void validate_scenario(Scenario& s) {
  const Box3& bb = s.bounding_box;
  if (!(bb.min.x < bb.max.x && bb.min.y < bb.max.y && bb.min.z < bb.max.z)) {
    throw ValidationError("bounds", "min must be strictly less than max on every axis");
  }
  const FlyableBand& band = s.flyable_band;
  if (!(band.z_min < band.z_max)) {
    throw ValidationError("flyable_band", "z_min must be less than z_max");
  }
  if (band.z_min < bb.min.z || band.z_max > bb.max.z) {
    throw ValidationError("flyable_band", "band must lie within the bounding box z-range");
  }

  std::unordered_set<std::string> ids;
  for (const auto& v : s.vertiports) {
    if (!ids.insert(v.id).second) throw ValidationError(v.id, "duplicate vertiport id");
    if (!bb.contains(v.position)) {
      throw ValidationError(v.id, "vertiport position outside bounding box");
    }
    if (!(v.radius >= 0.0)) throw ValidationError(v.id, "vertiport radius must be >= 0");
  }
  ids.clear();
  for (auto& o : s.obstacles) {
    if (!ids.insert(o.id).second) throw ValidationError(o.id, "duplicate obstacle id");
    if (!(o.lowest_alt < o.highest_alt)) {
      throw ValidationError(o.id, "obstacle lowest_alt must be below highest_alt");
    }
    if (!is_simple_polygon(o.footprint)) {
      throw ValidationError(o.id, "obstacle footprint is not a simple polygon");
    }
    make_counter_clockwise(o.footprint);
  }
  ids.clear();
  for (auto& z : s.risk_zones) {
    if (!ids.insert(z.id).second) throw ValidationError(z.id, "duplicate risk zone id");
    if (!(z.theta_risk > 0.0)) throw ValidationError(z.id, "theta_risk must be positive");
    if (z.theta_risk == 1.0) {
      throw ValidationError(z.id, "theta_risk of 1 is the ambient level; omit the zone");
    }
    if (!is_simple_polygon(z.footprint)) {
      throw ValidationError(z.id, "risk zone footprint is not a simple polygon");
    }
    make_counter_clockwise(z.footprint);
  }
  s.od_requests = validate_demand(s, std::move(s.od_requests));
}

// ---------------------------------------------------------------------------
// JSON document

namespace detail {

using nlohmann::json;

struct GeoOrigin {
  double lat, lon, alt;
};

inline const json& require(const json& obj, const char* key, const std::string& path) {
  if (!obj.is_object()) throw ParseError(path, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) {
    throw ParseError(path.empty() ? std::string(key) : path + "." + key, "missing field");
  }
  return *it;
}

inline double as_number(const json& j, const std::string& path) {
  if (!j.is_number()) throw ParseError(path, "expected a number");
  return j.get<double>();
}

inline std::string as_string(const json& j, const std::string& path) {
  if (!j.is_string()) throw ParseError(path, "expected a string");
  return j.get<std::string>();
}

inline const json& as_array(const json& j, const std::string& path) {
  if (!j.is_array()) throw ParseError(path, "expected an array");
  return j;
}

inline Vec3 as_vec3(const json& j, const std::string& path, const std::optional<GeoOrigin>& geo) {
  if (!j.is_array() || j.size() != 3) throw ParseError(path, "expected [x, y, z]");
  const double a = as_number(j[0], path + "[0]");
  const double b = as_number(j[1], path + "[1]");
  const double c = as_number(j[2], path + "[2]");
  if (geo) {
    const Vec2 en = project_equirectangular(a, b, geo->lat, geo->lon);
    return {en.x, en.y, c - geo->alt};
  }
  return {a, b, c};
}

inline Polygon as_polygon(const json& j, const std::string& path,
                          const std::optional<GeoOrigin>& geo) {
  as_array(j, path);
  Polygon poly;
  poly.reserve(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string p = path + "[" + std::to_string(i) + "]";
    if (!j[i].is_array() || j[i].size() != 2) throw ParseError(p, "expected [x, y]");
    const double a = as_number(j[i][0], p + "[0]");
    const double b = as_number(j[i][1], p + "[1]");
    poly.push_back(geo ? project_equirectangular(a, b, geo->lat, geo->lon) : Vec2{a, b});
  }
  if (poly.size() < 3) throw ParseError(path, "polygon needs at least 3 vertices");
  return poly;
}

inline ODRequest parse_request(const json& r, const std::string& p) {
  ODRequest req;
  req.id = as_string(require(r, "id", p), p + ".id");
  req.origin_vertiport = as_string(require(r, "origin_vertiport", p), p + ".origin_vertiport");
  req.dest_vertiport = as_string(require(r, "dest_vertiport", p), p + ".dest_vertiport");
  const std::string u = as_string(require(r, "urgency", p), p + ".urgency");
  auto urgency = parse_urgency(u);
  if (!urgency) throw ParseError(p + ".urgency", "unknown urgency '" + u + "'");
  req.urgency = *urgency;
  req.profit = as_number(require(r, "profit", p), p + ".profit");
  return req;
}

inline std::vector<ODRequest> parse_requests(const json& arr, const std::string& path) {
  as_array(arr, path);
  std::vector<ODRequest> out;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    out.push_back(parse_request(arr[i], path + "[" + std::to_string(i) + "]"));
  }
  return out;
}

inline json parse_json_text(std::string_view text) {
  try {
    return json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    // nlohmann reports "line L, column C" inside what().
    throw ParseError("document", e.what());
  }
}

inline json polygon_to_json(const Polygon& poly) {
  json arr = json::array();
  for (const Vec2& p : poly) arr.push_back({p.x, p.y});
  return arr;
}

}  // namespace detail

/// Parses and validates a scenario document.
inline Scenario load_scenario(std::string_view text) {
  using detail::json;
  const json doc = detail::parse_json_text(text);
  if (!doc.is_object()) throw ParseError("document", "top level must be an object");

  std::optional<detail::GeoOrigin> geo;
  if (auto it = doc.find("geodetic_origin"); it != doc.end()) {
    const std::string p = "geodetic_origin";
    geo = detail::GeoOrigin{detail::as_number(detail::require(*it, "lat", p), p + ".lat"),
                            detail::as_number(detail::require(*it, "lon", p), p + ".lon"),
                            detail::as_number(detail::require(*it, "alt", p), p + ".alt")};
  }

  Scenario s;
  const json& bounds = detail::require(doc, "bounds", "");
  s.bounding_box.min = detail::as_vec3(detail::require(bounds, "min", "bounds"), "bounds.min", geo);
  s.bounding_box.max = detail::as_vec3(detail::require(bounds, "max", "bounds"), "bounds.max", geo);

  const json& band = detail::require(doc, "flyable_band", "");
  if (!band.is_array() || band.size() != 2) {
    throw ParseError("flyable_band", "expected [z_min, z_max]");
  }
  const double alt0 = geo ? geo->alt : 0.0;
  s.flyable_band.z_min = detail::as_number(band[0], "flyable_band[0]") - alt0;
  s.flyable_band.z_max = detail::as_number(band[1], "flyable_band[1]") - alt0;

  auto optional_array = [&](const char* key) -> const json* {
    auto it = doc.find(key);
    if (it == doc.end()) return nullptr;
    return &detail::as_array(*it, key);
  };

  if (const json* arr = optional_array("vertiports")) {
    for (std::size_t i = 0; i < arr->size(); ++i) {
      const json& v = (*arr)[i];
      const std::string p = "vertiports[" + std::to_string(i) + "]";
      Vertiport vp;
      vp.id = detail::as_string(detail::require(v, "id", p), p + ".id");
      vp.position = detail::as_vec3(detail::require(v, "position", p), p + ".position", geo);
      vp.radius = detail::as_number(detail::require(v, "radius", p), p + ".radius");
      const std::string kind = detail::as_string(detail::require(v, "kind", p), p + ".kind");
      auto k = parse_vertiport_kind(kind);
      if (!k) throw ParseError(p + ".kind", "unknown vertiport kind '" + kind + "'");
      vp.kind = *k;
      s.vertiports.push_back(std::move(vp));
    }
  }
  if (const json* arr = optional_array("obstacles")) {
    for (std::size_t i = 0; i < arr->size(); ++i) {
      const json& o = (*arr)[i];
      const std::string p = "obstacles[" + std::to_string(i) + "]";
      ObstaclePrism ob;
      ob.id = detail::as_string(detail::require(o, "id", p), p + ".id");
      ob.footprint = detail::as_polygon(detail::require(o, "footprint", p), p + ".footprint", geo);
      ob.lowest_alt = detail::as_number(detail::require(o, "lowest_alt", p), p + ".lowest_alt") - alt0;
      ob.highest_alt =
          detail::as_number(detail::require(o, "highest_alt", p), p + ".highest_alt") - alt0;
      s.obstacles.push_back(std::move(ob));
    }
  }
  if (const json* arr = optional_array("risk_zones")) {
    for (std::size_t i = 0; i < arr->size(); ++i) {
      const json& z = (*arr)[i];
      const std::string p = "risk_zones[" + std::to_string(i) + "]";
      RiskZone rz;
      rz.id = detail::as_string(detail::require(z, "id", p), p + ".id");
      rz.footprint = detail::as_polygon(detail::require(z, "footprint", p), p + ".footprint", geo);
      rz.theta_risk = detail::as_number(detail::require(z, "theta_risk", p), p + ".theta_risk");
      s.risk_zones.push_back(std::move(rz));
    }
  }
  if (auto it = doc.find("od_requests"); it != doc.end()) {
    s.od_requests = detail::parse_requests(*it, "od_requests");
  }

  validate_scenario(s);
  return s;
}

/// Parses a standalone demand document: either a bare array of requests or an
/// object with an `od_requests` array.
inline std::vector<ODRequest> load_demand(std::string_view text) {
  const auto doc = detail::parse_json_text(text);
  if (doc.is_array()) return detail::parse_requests(doc, "od_requests");
  return detail::parse_requests(detail::require(doc, "od_requests", ""), "od_requests");
}

/// Merges a separately supplied demand list into the scenario's embedded one.
/// Requests are matched by id and the separate list wins; new ids are appended.
inline std::vector<ODRequest> merge_demand(const std::vector<ODRequest>& embedded,
                                           const std::vector<ODRequest>& separate) {
  std::vector<ODRequest> out = embedded;
  for (const auto& r : separate) {
    auto it = std::find_if(out.begin(), out.end(), [&](const ODRequest& e) { return e.id == r.id; });
    if (it != out.end()) {
      *it = r;
    } else {
      out.push_back(r);
    }
  }
  return out;
}

inline nlohmann::json scenario_to_json(const Scenario& s) {
  using detail::json;
  json doc;
  const Box3& bb = s.bounding_box;
  doc["bounds"] = {{"min", {bb.min.x, bb.min.y, bb.min.z}}, {"max", {bb.max.x, bb.max.y, bb.max.z}}};
  doc["flyable_band"] = {s.flyable_band.z_min, s.flyable_band.z_max};
  doc["vertiports"] = json::array();
  for (const auto& v : s.vertiports) {
    doc["vertiports"].push_back({{"id", v.id},
                                 {"position", {v.position.x, v.position.y, v.position.z}},
                                 {"radius", v.radius},
                                 {"kind", std::string(to_string(v.kind))}});
  }
  doc["obstacles"] = json::array();
  for (const auto& o : s.obstacles) {
    doc["obstacles"].push_back({{"id", o.id},
                                {"footprint", detail::polygon_to_json(o.footprint)},
                                {"lowest_alt", o.lowest_alt},
                                {"highest_alt", o.highest_alt}});
  }
  doc["risk_zones"] = json::array();
  for (const auto& z : s.risk_zones) {
    doc["risk_zones"].push_back({{"id", z.id},
                                 {"footprint", detail::polygon_to_json(z.footprint)},
                                 {"theta_risk", z.theta_risk}});
  }
  doc["od_requests"] = json::array();
  for (const auto& r : s.od_requests) {
    doc["od_requests"].push_back({{"id", r.id},
                                  {"origin_vertiport", r.origin_vertiport},
                                  {"dest_vertiport", r.dest_vertiport},
                                  {"urgency", std::string(to_string(r.urgency))},
                                  {"profit", r.profit}});
  }
  return doc;
}

inline std::string serialize_scenario(const Scenario& s) { return scenario_to_json(s).dump(2); }

// ---------------------------------------------------------------------------
// MovingAI octile maps

/// Parses a MovingAI `.map` grid. Each character becomes a 1 m square cell;
/// column c, row r covers [c, c+1] x [r, r+1]. Blocked cells ('@', 'T') become
/// unit obstacle prisms spanning the single-layer band [0, 1].
inline Scenario load_benchmark_map(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  long height = -1;
  long width = -1;
  bool in_body = false;
  std::vector<std::string> rows;
  std::vector<int> row_lines;
  auto where = [&] { return "line " + std::to_string(line_no); };

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!in_body) {
      std::istringstream hs(line);
      std::string key;
      hs >> key;
      if (key.empty()) continue;
      if (key == "type") continue;
      if (key == "height" || key == "width") {
        long v = -1;
        if (!(hs >> v) || v <= 0) throw ParseError(where(), "bad " + key + " value");
        (key == "height" ? height : width) = v;
        continue;
      }
      if (key == "map") {
        if (height < 0 || width < 0) throw ParseError(where(), "map body before height/width");
        in_body = true;
        continue;
      }
      throw ParseError(where(), "unexpected header key '" + key + "'");
    }
    if (line.empty() && static_cast<long>(rows.size()) == height) continue;
    if (static_cast<long>(line.size()) != width) {
      throw ParseError(where(), "row has " + std::to_string(line.size()) + " cells, header says " +
                                    std::to_string(width));
    }
    rows.push_back(line);
    row_lines.push_back(line_no);
  }
  if (!in_body) throw ParseError("header", "missing 'map' line");
  if (static_cast<long>(rows.size()) != height) {
    throw ParseError("body", "found " + std::to_string(rows.size()) + " rows, header says " +
                                 std::to_string(height));
  }

  Scenario s;
  s.bounding_box = {{0.0, 0.0, 0.0},
                    {static_cast<double>(width), static_cast<double>(height), 1.0}};
  s.flyable_band = {0.0, 1.0};
  for (long r = 0; r < height; ++r) {
    for (long c = 0; c < width; ++c) {
      const char ch = rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
      if (ch == '.' || ch == 'G') continue;
      if (ch != '@' && ch != 'T') {
        throw ParseError("line " + std::to_string(row_lines[static_cast<std::size_t>(r)]),
                         std::string("unknown cell character '") + ch + "'");
      }
      const double x = static_cast<double>(c);
      const double y = static_cast<double>(r);
      s.obstacles.push_back({"c" + std::to_string(c) + "_" + std::to_string(r),
                             {{x, y}, {x + 1, y}, {x + 1, y + 1}, {x, y + 1}},
                             0.0,
                             1.0});
    }
  }
  return s;
}

}  // namespace tubenet

#endif  // TUBENET_SCENARIO_HPP
