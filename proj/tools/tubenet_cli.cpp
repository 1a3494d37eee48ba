#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tubenet/tubenet.hpp"

namespace fs = std::filesystem;
using namespace tubenet;

namespace {

constexpr int kExitInfeasible = 2;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

struct RunConfig {
  std::string scenario;
  std::string demand;
  bool replace_demand = false;
  double cell_size = 10.0;
  int margin = 1;
  bool metric = false;
  double omega_r = 1.0;
  double omega_p = 1.0;
  double turning = 0.0, climbing = 0.0, descending = 0.0;
  double lambda_r = 0.0, lambda_p = 0.0;  // 0 = calibrate
  double eps_v = 1000.0;
  int K = 1;
  std::uint64_t seed = 0;
  double theta_max = 1.5;
  bool no_holds = false;
  bool normalized_heuristic = false;
  double heuristic_weight = 1.0;
  unsigned threads = 0;
  std::string out = "out";
};

void add_common(CLI::App* cmd, RunConfig& c) {
  cmd->add_option("--scenario", c.scenario, "scenario JSON")->required();
  cmd->add_option("--demand", c.demand, "separate demand JSON, merged by request id");
  cmd->add_flag("--replace-demand", c.replace_demand, "use only the --demand requests");
  cmd->add_option("--cell-size", c.cell_size, "cubic cell edge in meters")->check(CLI::PositiveNumber);
  cmd->add_option("--margin", c.margin, "obstacle inflation in cells")->check(CLI::NonNegativeNumber);
  cmd->add_flag("--metric", c.metric, "2x2x1 path cross-section instead of single cells");
  cmd->add_option("--omega-r", c.omega_r)->check(CLI::NonNegativeNumber);
  cmd->add_option("--omega-p", c.omega_p)->check(CLI::NonNegativeNumber);
  cmd->add_option("--turning", c.turning)->check(CLI::NonNegativeNumber);
  cmd->add_option("--climbing", c.climbing)->check(CLI::NonNegativeNumber);
  cmd->add_option("--descending", c.descending)->check(CLI::NonNegativeNumber);
  cmd->add_option("--lambda-r", c.lambda_r, "fixed risk scaling (skips calibration)")->check(CLI::PositiveNumber);
  cmd->add_option("--lambda-p", c.lambda_p, "fixed space scaling (skips calibration)")->check(CLI::PositiveNumber);
  cmd->add_option("--eps-v", c.eps_v, "profit segment threshold")->check(CLI::PositiveNumber);
  cmd->add_option("-K", c.K, "number of sequences")->check(CLI::PositiveNumber);
  cmd->add_option("--seed", c.seed);
  cmd->add_option("--theta-max", c.theta_max);
  cmd->add_flag("--no-endpoint-holds", c.no_holds, "let earlier routes pass next to later vertiports");
  cmd->add_option("--heuristic-weight", c.heuristic_weight)->check(CLI::Range(1.0, 100.0));
  cmd->add_flag("--normalized-heuristic", c.normalized_heuristic, "scale the heuristic by 1 + omega_r + omega_p");
  cmd->add_option("--threads", c.threads, "0 = all cores");
  cmd->add_option("--out", c.out, "output directory");
}

struct Loaded {
  Scenario scenario;
  GridGraph grid;
  std::vector<ODRequest> requests;
};

Loaded load(const RunConfig& c) {
  Scenario sc = load_scenario(read_file(c.scenario));
  std::vector<ODRequest> reqs = sc.od_requests;
  if (!c.demand.empty()) {
    auto extra = load_demand(read_file(c.demand));
    reqs = c.replace_demand ? std::move(extra) : merge_demand(reqs, extra);
  }
  reqs = validate_demand(sc, std::move(reqs));
  GridGraph grid = discretize(sc, {{c.cell_size, c.cell_size, c.cell_size}, c.margin});
  return {std::move(sc), std::move(grid), std::move(reqs)};
}

PlannerConfig planner_config(const RunConfig& c) {
  PlannerConfig cfg;
  if (c.metric) cfg.geometry.thickness = {2, 2, 1};
  cfg.weights = {c.omega_r, c.omega_p, c.turning, c.climbing, c.descending, 1.0, 1.0};
  if (c.lambda_r > 0.0 || c.lambda_p > 0.0) {
    cfg.calibrate = false;
    if (c.lambda_r > 0.0) cfg.weights.lambda_r = c.lambda_r;
    if (c.lambda_p > 0.0) cfg.weights.lambda_p = c.lambda_p;
  }
  cfg.search.heuristic_weight = c.heuristic_weight;
  cfg.search.normalized_heuristic = c.normalized_heuristic;
  cfg.theta_max = c.theta_max;
  cfg.hold_pending_endpoints = !c.no_holds;
  cfg.threads = c.threads;
  return cfg;
}

void print_infeasible(const InfeasibleNetworkError& e) {
  std::cerr << e.what() << "\n";
  for (const auto& d : e.details()) std::cerr << "  " << d << "\n";
}

// plan ----------------------------------------------------------------------

int cmd_plan(const RunConfig& c, bool dump_overlay) {
  const Loaded in = load(c);
  fs::create_directories(c.out);
  const PlannerConfig cfg = planner_config(c);
  NetworkPlan plan;
  try {
    plan = plan_network(in.grid, in.scenario, in.requests, {c.eps_v, c.K, c.seed}, cfg);
  } catch (const InfeasibleNetworkError& e) {
    print_infeasible(e);
    return kExitInfeasible;
  }
  nlohmann::json doc = {{"grid", grid_to_json(in.grid)},
                        {"arrangements", plan.batch.arrangements.value},
                        {"arrangements_exact", plan.batch.arrangements.exact},
                        {"sequences", plan.networks.size()},
                        {"network", network_to_json(plan.best, in.grid)}};
  write_file(fs::path(c.out) / "network.json", doc.dump(2) + "\n");
  write_file(fs::path(c.out) / "metrics.csv", metrics_csv(plan.networks, plan.best.sequence_id));
  write_file(fs::path(c.out) / "network.svg", render_svg(in.scenario, in.grid, plan.best));
  if (dump_overlay) {
    OccupancyOverlay ov(in.grid, cfg.geometry);
    for (const Route& r : plan.best.routes) ov.apply(r);
    write_file(fs::path(c.out) / "overlay.txt", dump_overlay_ascii(ov));
  }
  const SeparationReport sep = check_separation(plan.best.routes);
  std::cout << "routes " << plan.best.routes.size() << ", total cost " << fmt_number(plan.best.totals.total)
            << ", occupied cells " << plan.best.total_occupied << " (path " << plan.best.path_cells << ", buffer "
            << plan.best.buffer_cells << "), shared buffer cells " << sep.shared_buffer << "\n";
  return 0;
}

// calibrate -----------------------------------------------------------------

int cmd_calibrate(const RunConfig& c, const std::string& od) {
  const Loaded in = load(c);
  const ODRequest& r = detail::find_request(in.requests, od);
  const PlannerConfig cfg = planner_config(c);
  OccupancyOverlay empty(in.grid, cfg.geometry);
  const auto a = resolve_endpoint(empty, *in.scenario.find_vertiport(r.origin_vertiport));
  const auto b = resolve_endpoint(empty, *in.scenario.find_vertiport(r.dest_vertiport));
  if (!a || !b) throw CalibrationError("no free endpoint cell for " + od);
  const auto [lr, lp] = calibrate_lambdas(in.grid, *a, *b, cfg.weights, cfg.geometry);
  std::cout << "lambda_r " << fmt_number(lr) << "\nlambda_p " << fmt_number(lp) << "\n";
  return 0;
}

// sweep ---------------------------------------------------------------------

int cmd_sweep(RunConfig c, const std::string& param, const std::vector<double>& values) {
  const Loaded in = load(c);
  fs::create_directories(c.out);
  std::string csv = param + ",feasible,total_occupied,path_cells,buffer_cells,raw_risk,raw_space,total_cost,seconds\n";
  for (double v : values) {
    if (param == "omega_p") c.omega_p = v;
    else if (param == "omega_r") c.omega_r = v;
    else if (param == "K") c.K = static_cast<int>(v);
    else c.eps_v = v;
    const auto t0 = std::chrono::steady_clock::now();
    std::string row;
    try {
      const NetworkPlan plan = plan_network(in.grid, in.scenario, in.requests, {c.eps_v, c.K, c.seed}, planner_config(c));
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      const RouteNetwork& b = plan.best;
      row = fmt_number(v) + ",1," + std::to_string(b.total_occupied) + "," + std::to_string(b.path_cells) + "," +
            std::to_string(b.buffer_cells) + "," + fmt_number(b.raw_risk) + "," + fmt_number(b.raw_space) + "," +
            fmt_number(b.totals.total) + "," + fmt_number(secs);
    } catch (const InfeasibleNetworkError& e) {
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      row = fmt_number(v) + ",0,#,#,#,#,#,#," + fmt_number(secs);
    }
    std::cout << row << "\n";
    csv += row + "\n";
  }
  write_file(fs::path(c.out) / "sweep.csv", csv);
  return 0;
}

// benchmark -----------------------------------------------------------------

// Free cell nearest to (x, y) that keeps a one-cell gap to every used cell.
CellIndex nearest_free(const GridGraph& g, int x, int y, const std::vector<CellIndex>& used) {
  auto ok = [&](CellCoord c) {
    if (!g.in_bounds(c) || !g.reachable(g.index(c))) return false;
    for (CellIndex u : used) {
      const CellCoord uc = g.coord(u);
      if (std::abs(uc.x - c.x) <= 1 && std::abs(uc.y - c.y) <= 1) return false;
    }
    return true;
  };
  const int reach = std::max(g.nx(), g.ny());
  for (int r = 0; r <= reach; ++r) {
    for (int dy = -r; dy <= r; ++dy) {
      for (int dx = -r; dx <= r; ++dx) {
        if (std::max(std::abs(dx), std::abs(dy)) != r) continue;
        const CellCoord c{x + dx, y + dy, 0};
        if (ok(c)) return g.index(c);
      }
    }
  }
  throw GridError("no free cell for a benchmark endpoint");
}

// Routes alternate between the two diagonals; consecutive routes on the same
// diagonal are offset by two cells along the map edge.
std::vector<OracleRequest> corner_requests(const GridGraph& g, int n) {
  std::vector<OracleRequest> out;
  std::vector<CellIndex> used;
  const int W = g.nx() - 1, H = g.ny() - 1;
  for (int k = 0; k < n; ++k) {
    const int o = 2 * (k / 2);
    CellIndex a, b;
    if (k % 2 == 0) {
      a = nearest_free(g, o, 0, used);
      used.push_back(a);
      b = nearest_free(g, W - o, H, used);
    } else {
      a = nearest_free(g, o, H, used);
      used.push_back(a);
      b = nearest_free(g, W - o, 0, used);
    }
    used.push_back(b);
    out.push_back({"r" + std::to_string(k + 1), a, b});
  }
  return out;
}

std::size_t occupied(const std::vector<Route>& routes) {
  std::set<CellIndex> cells;
  for (const Route& r : routes) {
    cells.insert(r.path_cells.begin(), r.path_cells.end());
    cells.insert(r.buffer_cells.begin(), r.buffer_cells.end());
  }
  return cells.size();
}

int cmd_benchmark(const std::string& map, int routes, const std::string& solvers, double timeout,
                  bool buffers, const std::string& out) {
  const Scenario base = load_benchmark_map(read_file(map));
  const GridGraph grid = discretize(base, {{1, 1, 1}, 0});
  std::set<std::string> enabled;
  {
    std::stringstream ss(solvers);
    for (std::string s; std::getline(ss, s, ',');) {
      if (s != "seq" && s != "cbs" && s != "brute") throw std::invalid_argument("unknown solver " + s);
      enabled.insert(s);
    }
  }
  const auto all = corner_requests(grid, routes);
  fs::create_directories(out);
  std::string csv = "routes,solver,distance,occupied_cells,seconds\n";
  auto emit = [&](int n, const std::string& solver, const std::string& dist, const std::string& occ, double secs) {
    const std::string row = std::to_string(n) + "," + solver + "," + dist + "," + occ + "," + fmt_number(secs);
    std::cout << row << "\n";
    csv += row + "\n";
  };
  OracleOptions oopts;
  oopts.buffer_constraints = buffers;
  oopts.timeout = std::chrono::duration<double>(timeout);
  for (int n = 1; n <= routes; ++n) {
    const std::vector<OracleRequest> reqs(all.begin(), all.begin() + n);
    if (enabled.count("seq")) {
      Scenario sc = base;
      std::vector<ODRequest> ods;
      for (const auto& r : reqs) {
        sc.vertiports.push_back({r.od_id + "o", grid.center(r.start), 0.0, VertiportKind::Both});
        sc.vertiports.push_back({r.od_id + "d", grid.center(r.goal), 0.0, VertiportKind::Both});
        ods.push_back({r.od_id, r.od_id + "o", r.od_id + "d", Urgency::Urgent, 0.0});
      }
      PlannerConfig cfg;
      cfg.weights = {};
      cfg.threads = 1;
      const auto t0 = std::chrono::steady_clock::now();
      try {
        const NetworkPlan plan = plan_network(grid, sc, ods, {1.0, 1, 0}, cfg);
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        emit(n, "seq", fmt_number(plan.best.totals.operational), std::to_string(plan.best.total_occupied), secs);
      } catch (const InfeasibleNetworkError&) {
        emit(n, "seq", "#", "#", std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
      }
    }
    for (const char* name : {"cbs", "brute"}) {
      if (!enabled.count(name)) continue;
      const OracleResult res = std::string(name) == "cbs" ? cbs_spatial(grid, reqs, {}, oopts)
                                                          : brute_force_optimal(grid, reqs, {}, oopts);
      if (res.solved) {
        emit(n, name, fmt_number(res.total), std::to_string(occupied(res.routes)), res.seconds);
      } else if (res.infeasible) {
        emit(n, name, "#", "#", res.seconds);
      } else {
        emit(n, name, "-", "-", res.seconds);
      }
    }
  }
  write_file(fs::path(out) / "benchmark.csv", csv);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tubenet: drone route network planner"};
  app.require_subcommand(1);

  RunConfig plan_cfg;
  bool dump_overlay = false;
  auto* plan = app.add_subcommand("plan", "plan a route network and write network.json, metrics.csv, network.svg");
  add_common(plan, plan_cfg);
  plan->add_flag("--dump-overlay", dump_overlay, "also write overlay.txt with the occupancy layers");

  RunConfig cal_cfg;
  std::string od;
  auto* cal = app.add_subcommand("calibrate", "print the calibrated lambda_r and lambda_p for one OD");
  add_common(cal, cal_cfg);
  cal->add_option("--od", od, "request id")->required();

  RunConfig sweep_cfg;
  std::string param;
  std::vector<double> values;
  auto* sweep = app.add_subcommand("sweep", "one planner run per parameter value");
  add_common(sweep, sweep_cfg);
  sweep->add_option("--param", param)->required()->check(CLI::IsMember({"omega_p", "omega_r", "K", "eps_v"}));
  sweep->add_option("--values", values)->required()->delimiter(',');

  std::string map, solvers = "seq,cbs,brute", bench_out = "out";
  int routes = 1;
  double timeout = 60.0;
  bool buffers = false;
  auto* bench = app.add_subcommand("benchmark", "sequential planner vs oracles on a MovingAI map");
  bench->add_option("--map", map)->required()->check(CLI::ExistingFile);
  bench->add_option("--routes", routes, "largest route count")->check(CLI::Range(0, 64));
  bench->add_option("--solvers", solvers);
  bench->add_option("--timeout", timeout, "seconds per oracle run")->check(CLI::NonNegativeNumber);
  bench->add_flag("--buffers", buffers, "oracles also forbid path cells in other buffers");
  bench->add_option("--out", bench_out);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*plan) return cmd_plan(plan_cfg, dump_overlay);
    if (*cal) return cmd_calibrate(cal_cfg, od);
    if (*sweep) return cmd_sweep(sweep_cfg, param, values);
    if (*bench) return cmd_benchmark(map, routes, solvers, timeout, buffers, bench_out);
  } catch (const InfeasibleNetworkError& e) {
    print_infeasible(e);
    return kExitInfeasible;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
