#ifndef TUBENET_REPORT_HPP
#define TUBENET_REPORT_HPP

#include <algorithm>
#include <cstdio>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "tubenet/grid.hpp"
#include "tubenet/planner.hpp"
#include "tubenet/scenario.hpp"

namespace tubenet {

// Output documents. Wall-clock timings are written only when asked for, so
// the default payloads are reproducible byte for byte.

inline nlohmann::json cost_to_json(const CostBreakdown& c) {
  return {{"operational", c.operational}, {"risk", c.risk}, {"space", c.space}, {"total", c.total}};
}

inline nlohmann::json route_to_json(const Route& r, const GridGraph& grid) {
  nlohmann::json pts = nlohmann::json::array();
  for (const Vec3& p : r.waypoint_positions(grid)) pts.push_back({p.x, p.y, p.z});
  return {{"od_id", r.od_id},
          {"waypoints", pts},
          {"waypoint_cells", r.waypoints},
          {"path_cells", r.path_cells},
          {"buffer_cells", r.buffer_cells},
          {"cost", cost_to_json(r.cost)},
          {"raw_risk", r.raw_risk},
          {"raw_space", r.raw_space},
          {"lambda_r", r.lambda_r},
          {"lambda_p", r.lambda_p}};
}

inline nlohmann::json network_to_json(const RouteNetwork& net, const GridGraph& grid, bool with_timing = false) {
  nlohmann::json routes = nlohmann::json::array();
  for (const Route& r : net.routes) routes.push_back(route_to_json(r, grid));
  nlohmann::json failures = nlohmann::json::array();
  for (const RouteFailure& f : net.failures) failures.push_back({{"od_id", f.od_id}, {"reason", f.reason}});
  nlohmann::json doc = {{"sequence_id", net.sequence_id},
                        {"order", net.order},
                        {"feasible", net.feasible},
                        {"risk_passed", net.risk_passed},
                        {"failures", failures},
                        {"totals", cost_to_json(net.totals)},
                        {"raw_risk", net.raw_risk},
                        {"raw_space", net.raw_space},
                        {"occupancy",
                         {{"path_cells", net.path_cells},
                          {"buffer_cells", net.buffer_cells},
                          {"total_occupied", net.total_occupied}}},
                        {"routes", routes}};
  if (with_timing) doc["seconds"] = net.seconds;
  return doc;
}

inline nlohmann::json grid_to_json(const GridGraph& grid) {
  return {{"dims", grid.dims()},
          {"cell_size", {grid.cell_size().x, grid.cell_size().y, grid.cell_size().z}},
          {"origin", {grid.origin().x, grid.origin().y, grid.origin().z}}};
}

inline std::string fmt_number(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

inline const char* kMetricsHeader =
    "sequence,selected,feasible,risk_passed,routes,failures,operational,risk,space,total,raw_risk,raw_space,"
    "path_cells,buffer_cells,total_occupied";

inline std::string metrics_row(const RouteNetwork& net, bool selected) {
  std::ostringstream os;
  os << net.sequence_id << ',' << (selected ? 1 : 0) << ',' << (net.feasible ? 1 : 0) << ','
     << (net.risk_passed ? 1 : 0) << ',' << net.routes.size() << ',' << net.failures.size() << ','
     << fmt_number(net.totals.operational) << ',' << fmt_number(net.totals.risk) << ','
     << fmt_number(net.totals.space) << ',' << fmt_number(net.totals.total) << ',' << fmt_number(net.raw_risk)
     << ',' << fmt_number(net.raw_space) << ',' << net.path_cells << ',' << net.buffer_cells << ','
     << net.total_occupied;
  return os.str();
}

/// One row per sequence; `selected` marks the returned network.
inline std::string metrics_csv(const std::vector<RouteNetwork>& nets, std::optional<std::size_t> selected) {
  std::string out = std::string(kMetricsHeader) + "\n";
  for (const RouteNetwork& n : nets) out += metrics_row(n, selected && *selected == n.sequence_id) + "\n";
  return out;
}

struct SvgOptions {
  double width_px = 800.0;
  /// Layers whose buffer and path cells are drawn; empty draws all.
  std::vector<int> layers;
  bool draw_buffers = true;
};

namespace detail {

inline std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

inline const char* route_color(std::size_t i) {
  static const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
                                   "#8c564b", "#e377c2", "#17becf", "#bcbd22", "#7f7f7f"};
  return kPalette[i % 10];
}

}  // namespace detail

/// Top view of the scenario and a planned network. y grows upwards.
inline std::string render_svg(const Scenario& sc, const GridGraph& grid, const RouteNetwork& net,
                              const SvgOptions& opts = {}) {
  const double x0 = grid.origin().x;
  const double y0 = grid.origin().y;
  const double w = grid.nx() * grid.cell_size().x;
  const double h = grid.ny() * grid.cell_size().y;
  const double s = opts.width_px / w;
  const double height_px = h * s;
  auto px = [&](double x) { return fmt_number((x - x0) * s); };
  auto py = [&](double y) { return fmt_number(height_px - (y - y0) * s); };
  auto layer_on = [&](int z) {
    return opts.layers.empty() || std::find(opts.layers.begin(), opts.layers.end(), z) != opts.layers.end();
  };
  const int shown = opts.layers.empty() ? grid.nz() : static_cast<int>(opts.layers.size());
  const std::string layer_opacity = fmt_number(std::max(0.15, 1.0 / std::max(shown, 1)));

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt_number(opts.width_px) << "\" height=\""
     << fmt_number(height_px) << "\" viewBox=\"0 0 " << fmt_number(opts.width_px) << ' ' << fmt_number(height_px)
     << "\">\n";
  os << "<rect x=\"0\" y=\"0\" width=\"" << fmt_number(opts.width_px) << "\" height=\"" << fmt_number(height_px)
     << "\" fill=\"white\" stroke=\"black\"/>\n";

  auto polygon = [&](const Polygon& poly, const std::string& style, const std::string& id) {
    os << "<polygon data-id=\"" << detail::xml_escape(id) << "\" points=\"";
    for (std::size_t i = 0; i < poly.size(); ++i) os << (i ? " " : "") << px(poly[i].x) << ',' << py(poly[i].y);
    os << "\" " << style << "/>\n";
  };
  os << "<g id=\"risk\">\n";
  for (const RiskZone& z : sc.risk_zones) {
    polygon(z.footprint, z.theta_risk > 1.0 ? "fill=\"#f4a6a6\" fill-opacity=\"0.5\"" : "fill=\"#a6e3a6\" fill-opacity=\"0.5\"",
            z.id);
  }
  os << "</g>\n<g id=\"obstacles\">\n";
  for (const ObstaclePrism& o : sc.obstacles) polygon(o.footprint, "fill=\"#555555\"", o.id);
  os << "</g>\n";

  auto cell_rect = [&](CellIndex c, const char* fill) {
    const Box3 b = grid.cell_box(grid.coord(c));
    os << "<rect x=\"" << px(b.min.x) << "\" y=\"" << py(b.max.y) << "\" width=\""
       << fmt_number(grid.cell_size().x * s) << "\" height=\"" << fmt_number(grid.cell_size().y * s) << "\" fill=\""
       << fill << "\" fill-opacity=\"" << layer_opacity << "\"/>\n";
  };
  if (opts.draw_buffers) {
    os << "<g id=\"buffers\">\n";
    std::set<CellIndex> drawn;
    for (const Route& r : net.routes) {
      for (CellIndex c : r.buffer_cells) {
        if (layer_on(grid.coord(c).z) && drawn.insert(c).second) cell_rect(c, "#f2d16b");
      }
    }
    os << "</g>\n";
  }
  os << "<g id=\"paths\">\n";
  for (std::size_t i = 0; i < net.routes.size(); ++i) {
    const Route& r = net.routes[i];
    for (CellIndex c : r.path_cells) {
      if (layer_on(grid.coord(c).z)) cell_rect(c, detail::route_color(i));
    }
    os << "<polyline data-od=\"" << detail::xml_escape(r.od_id) << "\" fill=\"none\" stroke=\""
       << detail::route_color(i) << "\" stroke-width=\"2\" points=\"";
    const auto pts = r.waypoint_positions(grid);
    for (std::size_t k = 0; k < pts.size(); ++k) os << (k ? " " : "") << px(pts[k].x) << ',' << py(pts[k].y);
    os << "\"/>\n";
  }
  os << "</g>\n<g id=\"vertiports\">\n";
  for (const Vertiport& v : sc.vertiports) {
    os << "<circle cx=\"" << px(v.position.x) << "\" cy=\"" << py(v.position.y) << "\" r=\"4\" fill=\"black\"/>\n";
    os << "<text x=\"" << px(v.position.x) << "\" y=\"" << py(v.position.y) << "\" dx=\"5\" font-size=\"10\">"
       << detail::xml_escape(v.id) << "</text>\n";
  }
  os << "</g>\n</svg>\n";
  return os.str();
}

}  // namespace tubenet

#endif  // TUBENET_REPORT_HPP
