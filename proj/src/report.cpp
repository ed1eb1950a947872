#include "routesig/report.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "routesig/moments.hpp"

namespace routesig {

namespace {

std::string fmt_full(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

long elapsed_ms(std::chrono::steady_clock::time_point t0) {
  auto dt = std::chrono::steady_clock::now() - t0;
  return std::chrono::duration_cast<std::chrono::milliseconds>(dt).count();
}

}  // namespace

std::optional<double> certified_lower_bound(const RoutingScenario& sc,
                                            const DesignSolution& sol) {
  if (sc.max_degree() == 1) {
    MomentProgram prog = build_diagonal_sdp(sc, sol.policy.nu);
    auto res = solve_moment_sdp(prog);
    if (res.status == SdpStatus::Optimal) return res.value;
    return std::nullopt;
  }
  if (sc.num_routes() == 2) {
    auto res = two_link_univariate_sdp(sc, sol.y);
    if (res.status == SdpStatus::Optimal) return res.value;
  }
  return std::nullopt;
}

RunReport run_sweep(const RoutingScenario& sc, const SweepConfig& cfg) {
  RunReport report;
  report.scenario_digest = sc.digest;
  report.seed = cfg.design.seed;

  const int m = cfg.atoms > 0 ? cfg.atoms : sc.num_states();
  std::vector<double> grid = cfg.grid;
  std::sort(grid.begin(), grid.end());

  auto want = [&](const std::string& mode) {
    if (cfg.modes.empty()) return true;
    for (const auto& s : cfg.modes)
      if (s == mode) return true;
    return false;
  };

  auto push_row = [&](double nu, const std::string& mode, double cost, double obed,
                      double nash, int starts, long wall,
                      std::optional<double> bound) {
    RunReportRow row;
    row.nu = nu;
    row.mode = mode;
    row.cost = cost;
    row.lower_bound = bound;
    if (bound) row.gap = cost - *bound;
    row.max_obedience_residual = obed;
    row.max_nash_residual = nash;
    row.starts = starts;
    row.seed = cfg.design.seed;
    row.wall_ms = cfg.with_timing ? wall : 0;
    report.rows.push_back(row);
  };

  if (want("first-best")) {
    auto t0 = std::chrono::steady_clock::now();
    auto fb = first_best(sc);
    long wall = elapsed_ms(t0);
    for (double nu : grid) push_row(nu, "first-best", fb.cost, 0.0, 0.0, 0, wall, {});
  }

  for (const char* kind : {"no-info", "full-info"}) {
    if (!want(kind)) continue;
    for (double nu : grid) {
      auto t0 = std::chrono::steady_clock::now();
      PublicPolicy pol = std::string(kind) == "no-info"
                             ? no_information_policy(sc.num_states(), 1)
                             : full_information_policy(sc.num_states(), sc.num_states());
      auto ev = evaluate_public(sc, pol, nu);
      Eigen::MatrixXd flows(sc.num_routes(), pol.num_messages());
      for (int k = 0; k < pol.num_messages(); ++k)
        flows.col(k) = ev.equilibrium.message_flows[k].values;
      auto res = public_residuals(sc, pol, flows, ev.equilibrium.nonparticipant.values);
      if (!ev.equilibrium.converged) report.had_failures = true;
      push_row(nu, kind, ev.cost, res.max_message(), res.max_nonparticipant(), 0,
               elapsed_ms(t0), {});
    }
  }

  auto run_design = [&](const std::string& mode, SweepMode sm) {
    auto t0 = std::chrono::steady_clock::now();
    auto points = sweep_nu(sc, grid, sm, m, cfg.design);
    long wall_total = elapsed_ms(t0);
    long per = points.empty() ? 0 : wall_total / static_cast<long>(points.size());
    for (const auto& pt : points) {
      std::optional<double> bound;
      if (cfg.certify) bound = certified_lower_bound(sc, pt.solution);
      push_row(pt.nu, mode, pt.solution.cost, pt.solution.maxObedienceResidual,
               pt.solution.maxNashResidual, pt.solution.startsUsed, per, bound);
    }
  };
  if (want("diagonal")) run_design("diagonal", SweepMode::Diagonal);
  if (want("private")) run_design("private", SweepMode::Private);
  if (want("public")) run_design("public", SweepMode::Public);

  return report;
}

std::string to_csv(const RunReport& report) {
  std::ostringstream out;
  out << "# scenario=" << report.scenario_digest << " tool=" << report.tool_version
      << " seed=" << report.seed;
  if (!report.command.empty()) out << " command=" << report.command;
  out << "\n";
  out << "nu,mode,cost,lower_bound,gap,max_obedience_residual,max_nash_residual,"
         "starts,seed,wall_ms\n";
  for (const auto& r : report.rows) {
    out << fmt_full(r.nu) << "," << r.mode << "," << fmt_full(r.cost) << ",";
    if (r.lower_bound) out << fmt_full(*r.lower_bound);
    out << ",";
    if (r.gap) out << fmt_full(*r.gap);
    out << "," << fmt_full(r.max_obedience_residual) << ","
        << fmt_full(r.max_nash_residual) << "," << r.starts << "," << r.seed << ","
        << r.wall_ms << "\n";
  }
  return out.str();
}

}  // namespace routesig
