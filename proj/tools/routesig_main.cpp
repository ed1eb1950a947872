// Command-line front end: equilibrium and design solves, participation
// sweeps, certification reports and SDPA export.

#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iostream>

#include "routesig/moments.hpp"
#include "routesig/private_design.hpp"
#include "routesig/report.hpp"

using namespace routesig;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;      // validation / IO errors
constexpr int kExitResidual = 2;   // residuals above tolerance

void print_vector(const std::string& name, const Eigen::VectorXd& v) {
  std::printf("%s = [", name.c_str());
  for (int i = 0; i < v.size(); ++i) std::printf(i ? " %.2f" : "%.2f", v[i]);
  std::printf("]\n");
}

void print_matrix(const std::string& name, const Eigen::MatrixXd& m) {
  std::printf("%s =\n", name.c_str());
  for (int r = 0; r < m.rows(); ++r) {
    std::printf("  [");
    for (int c = 0; c < m.cols(); ++c) std::printf(c ? " %7.2f" : "%7.2f", m(r, c));
    std::printf("]\n");
  }
}

std::vector<double> parse_grid(const std::string& text) {
  std::vector<double> grid;
  std::string token;
  std::stringstream ss(text);
  while (std::getline(ss, token, ',')) grid.push_back(std::stod(token));
  return grid;
}

int cmd_equilibrium(const std::string& path, const std::string& policy, double nu,
                    const std::string& csv_path) {
  RoutingScenario sc = load_scenario(path);
  PublicPolicy pol = policy == "full-info"
                         ? full_information_policy(sc.num_states(), sc.num_states())
                         : no_information_policy(sc.num_states(), 1);
  auto res = bne_indirect(sc, pol, nu);

  std::printf("scenario %s  (digest %s)\n", path.c_str(), sc.digest.c_str());
  std::printf("policy %s, nu = %.4f\n", policy.c_str(), nu);
  for (size_t k = 0; k < res.message_flows.size(); ++k)
    print_vector("x(" + std::to_string(k + 1) + ")", res.message_flows[k].values);
  print_vector("y", res.nonparticipant.values);
  std::printf("potential = %.6f\n", res.potentialValue);
  std::printf("kkt residual = %.3e  (iterations %ld)\n", res.kktResidual,
              res.iterations);

  if (!csv_path.empty()) {
    std::ofstream out(csv_path);
    out << "segment,route,flow\n";
    for (size_t k = 0; k < res.message_flows.size(); ++k)
      for (int i = 0; i < res.message_flows[k].values.size(); ++i)
        out << "x" << (k + 1) << "," << (i + 1) << ","
            << res.message_flows[k].values[i] << "\n";
    for (int i = 0; i < res.nonparticipant.values.size(); ++i)
      out << "y," << (i + 1) << "," << res.nonparticipant.values[i] << "\n";
  }
  return res.converged ? kExitOk : kExitResidual;
}

int cmd_first_best(const std::string& path) {
  RoutingScenario sc = load_scenario(path);
  auto fb = first_best(sc);
  std::printf("scenario %s  (digest %s)\n", path.c_str(), sc.digest.c_str());
  for (int w = 0; w < sc.num_states(); ++w)
    print_vector("f(" + sc.states[w] + ")", fb.state_flows[w].values);
  std::printf("first-best benchmark = %.2f\n", fb.cost);
  std::printf("total latency at benchmark flows = %.2f\n", fb.totalLatencyCost);
  return kExitOk;
}

int cmd_design(const std::string& path, const std::string& mode, double nu, int atoms,
               int starts, std::uint64_t seed, bool certify, bool certified_m,
               int threads) {
  RoutingScenario sc = load_scenario(path);
  DesignOptions opts;
  opts.starts = starts;
  opts.seed = seed;
  opts.threads = threads;

  int m = atoms > 0 ? atoms : sc.num_states();
  if (certified_m)
    m = static_cast<int>(
        atom_bound(sc.num_states(), sc.num_routes(), sc.max_degree()));
  DesignSolution sol;
  if (mode == "private")
    sol = optimize_private(sc, nu, m, opts);
  else if (mode == "diagonal")
    sol = optimize_diagonal(sc, nu, opts);
  else if (mode == "public")
    sol = optimize_public(sc, nu, m, opts);
  else
    throw std::runtime_error("unknown design mode '" + mode + "'");

  std::printf("scenario %s  (digest %s)\n", path.c_str(), sc.digest.c_str());
  std::printf("mode %s, nu = %.4f, atoms = %d, starts = %d, seed = %llu\n",
              mode.c_str(), nu, sol.policy.num_atoms(), sol.startsUsed,
              static_cast<unsigned long long>(sol.seed));
  print_matrix("x (atoms as columns)", sol.policy.atoms);
  print_matrix("pi (states x atoms)", sol.policy.weights);
  print_vector("y", sol.y.values);
  std::printf("cost = %.2f\n", sol.cost);
  std::printf("max obedience residual = %.3e\n", sol.maxObedienceResidual);
  std::printf("max nash residual      = %.3e\n", sol.maxNashResidual);

  if (certify) {
    auto bound = certified_lower_bound(sc, sol);
    if (bound) {
      std::printf("lower bound = %.6f\n", *bound);
      std::printf("gap         = %.6f\n", sol.cost - *bound);
    } else {
      std::printf("no certificate available for this instance class\n");
    }
  }

  const double tol = 1e-6 * (1.0 + std::abs(sol.cost));
  const bool ok = sol.maxObedienceResidual <= tol && sol.maxNashResidual <= tol;
  return ok ? kExitOk : kExitResidual;
}

int cmd_sweep(const std::string& path, const std::string& grid_text,
              const std::string& modes_text, int atoms, int starts,
              std::uint64_t seed, int threads, bool certify, bool no_timing,
              const std::string& out_path) {
  RoutingScenario sc = load_scenario(path);
  SweepConfig cfg;
  cfg.grid = parse_grid(grid_text);
  if (!modes_text.empty()) {
    std::string token;
    std::stringstream ss(modes_text);
    while (std::getline(ss, token, ',')) cfg.modes.push_back(token);
  }
  cfg.atoms = atoms;
  cfg.certify = certify;
  cfg.with_timing = !no_timing;
  cfg.design.starts = starts;
  cfg.design.seed = seed;
  cfg.design.threads = threads;

  RunReport report = run_sweep(sc, cfg);
  report.command = "sweep";
  std::string csv = to_csv(report);
  if (out_path.empty() || out_path == "-") {
    std::fputs(csv.c_str(), stdout);
  } else {
    std::ofstream out(out_path);
    if (!out) throw std::runtime_error("cannot open '" + out_path + "'");
    out << csv;
    std::printf("wrote %s (%zu rows)\n", out_path.c_str(), report.rows.size());
  }
  return report.had_failures ? kExitResidual : kExitOk;
}

int cmd_certify(const std::string& path, double nu, int starts, std::uint64_t seed,
                int threads) {
  RoutingScenario sc = load_scenario(path);
  DesignOptions opts;
  opts.starts = starts;
  opts.seed = seed;
  opts.threads = threads;
  DesignSolution sol = optimize_diagonal(sc, nu, opts);

  std::printf("scenario %s  (digest %s)\n", path.c_str(), sc.digest.c_str());
  std::printf("diagonal cost = %.6f\n", sol.cost);

  if (sc.max_degree() == 1) {
    auto prog = build_diagonal_sdp(sc, nu);
    auto res = solve_moment_sdp(prog);
    if (res.status != SdpStatus::Optimal) {
      std::printf("relaxation solve failed: %s\n", res.message.c_str());
      return kExitResidual;
    }
    std::printf("lower bound   = %.6f\n", res.value);
    std::printf("gap           = %.6f\n", sol.cost - res.value);
    if (res.tms) {
      const char* verdict =
          res.tms->verdict == TmsCheck::Verdict::Rank1Admissible ? "rank-1-admissible"
          : res.tms->verdict == TmsCheck::Verdict::NotRank1      ? "not-rank-1"
                                                                 : "constraint-violated";
      std::printf("moment matrix verdict = %s (eigen ratio %.3e)\n", verdict,
                  res.tms->eigenRatio);
      if (res.tms->extractedPoint) {
        Eigen::VectorXd pt = *res.tms->extractedPoint;
        print_vector("extracted point", pt);
      }
    }
  } else if (sc.num_routes() == 2) {
    auto res = two_link_univariate_sdp(sc, sol.y);
    if (res.status != SdpStatus::Optimal) {
      std::printf("relaxation solve failed: %s\n", res.message.c_str());
      return kExitResidual;
    }
    std::printf("fixed-y lower bound = %.6f\n", res.value);
    std::printf("gap                 = %.6f\n", sol.cost - res.value);
  } else {
    std::printf("no certificate available for this instance class\n");
  }
  return kExitOk;
}

int cmd_export_sdpa(const std::string& path, double nu, const std::string& out_path) {
  RoutingScenario sc = load_scenario(path);
  MomentProgram prog = build_diagonal_sdp(sc, nu);
  export_sdpa(prog, out_path);
  std::printf("wrote %s (dimension %d, %zu constraints)\n", out_path.c_str(),
              prog.dim(), prog.constraints.size());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"information design solver for Bayesian routing games"};
  app.require_subcommand(1);

  std::string path, policy = "no-info", csv_path, mode = "diagonal";
  std::string grid_text = "0,0.25,0.5,0.75,1", modes_text, out_path;
  double nu = 0.0;
  int atoms = 0, starts = 100, threads = 0;
  std::uint64_t seed = 0;
  bool certify = false, certified_m = false, no_timing = false;

  auto* eq = app.add_subcommand("equilibrium", "Bayes Nash flow for a fixed policy");
  eq->add_option("scenario", path)->required();
  eq->add_option("--nu", nu)->required();
  eq->add_option("--policy", policy)->check(CLI::IsMember({"no-info", "full-info"}));
  eq->add_option("--csv", csv_path);

  auto* fb = app.add_subcommand("first-best", "planner benchmark");
  fb->add_option("scenario", path)->required();

  auto* de = app.add_subcommand("design", "optimize a signaling policy");
  de->add_option("scenario", path)->required();
  de->add_option("--mode", mode)->check(CLI::IsMember({"private", "diagonal", "public"}));
  de->add_option("--nu", nu)->required();
  de->add_option("--atoms", atoms);
  de->add_option("--starts", starts);
  de->add_option("--seed", seed);
  de->add_option("--threads", threads);
  de->add_flag("--certify", certify);
  de->add_flag("--certified-m", certified_m,
               "use the provably sufficient atom count s * C(D+n, D+1)");

  auto* sw = app.add_subcommand("sweep", "cost curves over participation levels");
  sw->add_option("scenario", path)->required();
  sw->add_option("--grid", grid_text);
  sw->add_option("--modes", modes_text,
                 "comma list of first-best,no-info,full-info,diagonal,private,public");
  sw->add_option("--atoms", atoms);
  sw->add_option("--starts", starts);
  sw->add_option("--seed", seed);
  sw->add_option("--threads", threads);
  sw->add_flag("--certify", certify);
  sw->add_flag("--no-timing", no_timing, "report wall_ms as 0 for reproducible output");
  sw->add_option("--out", out_path, "CSV output path ('-' for stdout)");

  auto* ce = app.add_subcommand("certify", "lower bound and optimality gap");
  ce->add_option("scenario", path)->required();
  ce->add_option("--nu", nu)->required();
  ce->add_option("--starts", starts);
  ce->add_option("--seed", seed);
  ce->add_option("--threads", threads);

  auto* ex = app.add_subcommand("export-sdpa", "write the moment relaxation");
  ex->add_option("scenario", path)->required();
  ex->add_option("--nu", nu)->required();
  ex->add_option("--out", out_path)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (eq->parsed()) return cmd_equilibrium(path, policy, nu, csv_path);
    if (fb->parsed()) return cmd_first_best(path);
    if (de->parsed())
      return cmd_design(path, mode, nu, atoms, starts, seed, certify, certified_m,
                        threads);
    if (sw->parsed())
      return cmd_sweep(path, grid_text, modes_text, atoms, starts, seed, threads,
                       certify, no_timing, out_path);
    if (ce->parsed()) return cmd_certify(path, nu, starts, seed, threads);
    if (ex->parsed()) return cmd_export_sdpa(path, nu, out_path);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitError;
  }
  return kExitError;
}
