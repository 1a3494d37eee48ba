#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "tubenet/report.hpp"

using namespace tubenet;

namespace {

Scenario toy() {
  std::ifstream in(std::string(TUBENET_DATA_DIR) + "/toy_two_obstacles.json");
  std::stringstream ss;
  ss << in.rdbuf();
  return load_scenario(ss.str());
}

struct Planned {
  Scenario sc;
  GridGraph grid;
  NetworkPlan plan;
};

Planned plan_toy() {
  Scenario sc = toy();
  sc.od_requests.resize(3);
  GridGraph grid = discretize(sc);
  PlannerConfig cfg;
  cfg.weights.omega_p = 1;
  cfg.threads = 1;
  NetworkPlan plan = plan_network(grid, sc, sc.od_requests, {1000, 2, 3}, cfg);
  return {std::move(sc), std::move(grid), std::move(plan)};
}

std::size_t count(const std::string& s, const std::string& needle) {
  std::size_t n = 0;
  for (auto p = s.find(needle); p != std::string::npos; p = s.find(needle, p + 1)) ++n;
  return n;
}

}  // namespace

TEST(Report, NetworkJsonFields) {
  const Planned p = plan_toy();
  const auto doc = network_to_json(p.plan.best, p.grid);
  EXPECT_FALSE(doc.contains("seconds"));
  EXPECT_TRUE(network_to_json(p.plan.best, p.grid, true).contains("seconds"));
  ASSERT_EQ(doc["routes"].size(), 3u);
  EXPECT_EQ(doc["feasible"], true);
  EXPECT_EQ(doc["occupancy"]["total_occupied"], p.plan.best.total_occupied);
  for (const auto& r : doc["routes"]) {
    EXPECT_EQ(r["waypoints"].size(), r["waypoint_cells"].size());
    EXPECT_GE(r["waypoints"].size(), 2u);
    EXPECT_TRUE(r["cost"].contains("total"));
    EXPECT_GT(r["lambda_r"].get<double>(), 0.0);
  }
  double total = 0;
  for (const auto& r : doc["routes"]) total += r["cost"]["total"].get<double>();
  EXPECT_NEAR(doc["totals"]["total"].get<double>(), total, 1e-9);
  const auto g = grid_to_json(p.grid);
  EXPECT_EQ(g["dims"], (std::vector<int>{25, 30, 1}));
}

TEST(Report, DeterministicWithoutTiming) {
  const Planned a = plan_toy();
  const Planned b = plan_toy();
  EXPECT_EQ(network_to_json(a.plan.best, a.grid).dump(), network_to_json(b.plan.best, b.grid).dump());
  EXPECT_EQ(metrics_csv(a.plan.networks, a.plan.best.sequence_id),
            metrics_csv(b.plan.networks, b.plan.best.sequence_id));
}

TEST(Report, MetricsCsv) {
  const Planned p = plan_toy();
  const std::string csv = metrics_csv(p.plan.networks, p.plan.best.sequence_id);
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, kMetricsHeader);
  const std::size_t columns = count(line, ",") + 1;
  int rows = 0, selected = 0;
  while (std::getline(in, line)) {
    ++rows;
    EXPECT_EQ(count(line, ",") + 1, columns);
    if (line.rfind(std::to_string(p.plan.best.sequence_id) + ",1,", 0) == 0) ++selected;
  }
  EXPECT_EQ(rows, static_cast<int>(p.plan.networks.size()));
  EXPECT_EQ(selected, 1);
  EXPECT_EQ(count(metrics_csv(p.plan.networks, std::nullopt), ",1,1,1,"), 0u);
}

TEST(Report, SvgGroups) {
  const Planned p = plan_toy();
  const std::string svg = render_svg(p.sc, p.grid, p.plan.best);
  EXPECT_EQ(svg.rfind("<svg", 0), 0u);
  for (const char* id : {"risk", "obstacles", "buffers", "paths", "vertiports"}) {
    EXPECT_NE(svg.find(std::string("<g id=\"") + id + "\">"), std::string::npos) << id;
  }
  EXPECT_EQ(count(svg, "<polyline"), 3u);
  EXPECT_EQ(count(svg, "<circle"), p.sc.vertiports.size());
  SvgOptions no_buf;
  no_buf.draw_buffers = false;
  EXPECT_EQ(render_svg(p.sc, p.grid, p.plan.best, no_buf).find("id=\"buffers\""), std::string::npos);
  SvgOptions other_layer;
  other_layer.layers = {3};
  EXPECT_LT(render_svg(p.sc, p.grid, p.plan.best, other_layer).size(), svg.size());
}

TEST(Report, FormatsNumbers) {
  EXPECT_EQ(fmt_number(1.5), "1.5");
  EXPECT_EQ(fmt_number(100), "100");
  EXPECT_EQ(fmt_number(1.0 / 3.0), "0.3333333333");
  EXPECT_EQ(detail::xml_escape("a<b&\"c\">"), "a&lt;b&amp;&quot;c&quot;&gt;");
}
