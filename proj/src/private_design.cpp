#include "routesig/private_design.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "al_engine.hpp"
#include "routesig/public_design.hpp"

namespace routesig {

ObedienceResiduals obedience_residuals(const RoutingScenario& sc,
                                       const AtomicPrivatePolicy& policy,
                                       const Eigen::VectorXd& y) {
  const int n = sc.num_routes();
  const int s = sc.num_states();
  const int m = policy.num_atoms();
  if (policy.atoms.rows() != n || y.size() != n || policy.weights.rows() != s ||
      policy.weights.cols() != m)
    throw std::runtime_error("obedience_residuals: dimension mismatch");

  const Eigen::MatrixXd jw = sc.prior.asDiagonal() * policy.weights;
  ObedienceResiduals out;
  out.obedience = Eigen::MatrixXd::Zero(n, n);
  out.nash = Eigen::MatrixXd::Zero(n, n);

  for (int k = 0; k < m; ++k) {
    const Eigen::VectorXd agg = policy.atoms.col(k) + y;
    for (int w = 0; w < s; ++w) {
      if (jw(w, k) == 0.0) continue;
      const Eigen::VectorXd rl = sc.route_latency(w, agg);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          if (i == j) continue;
          out.obedience(i, j) += jw(w, k) * policy.atoms(i, k) * (rl[i] - rl[j]);
          out.nash(i, j) += jw(w, k) * y[i] * (rl[i] - rl[j]);
        }
    }
  }
  return out;
}

PosteriorTable posteriors(const RoutingScenario& sc, const AtomicPrivatePolicy& policy) {
  const int n = sc.num_routes();
  const int s = sc.num_states();
  const int m = policy.num_atoms();
  check_row_stochastic(policy.weights);

  PosteriorTable table;
  table.non_recipient = (sc.prior.asDiagonal() * policy.weights).transpose();  // m x s
  table.recipient.resize(n);
  table.never_recommended.assign(n, false);

  for (int i = 0; i < n; ++i) {
    Eigen::MatrixXd joint(m, s);
    for (int k = 0; k < m; ++k)
      for (int w = 0; w < s; ++w)
        joint(k, w) = policy.atoms(i, k) * policy.weights(w, k) * sc.prior[w];
    const double z = joint.sum();
    if (z <= 0.0) {
      table.never_recommended[i] = true;
      continue;
    }
    table.recipient[i] = joint / z;
  }
  return table;
}

long long atom_bound(int s, int n, int D) {
  if (s < 1 || n < 1 || D < 0) throw std::runtime_error("atom_bound: bad arguments");
  // C(D+n, D+1) with exact integer arithmetic
  const int top = D + n;
  const int k = std::min(D + 1, top - (D + 1));
  long long c = 1;
  for (int i = 1; i <= k; ++i) c = c * (top - k + i) / i;
  return static_cast<long long>(s) * c;
}

namespace {

DesignSolution prior_only_solution(const RoutingScenario& sc, int m,
                                   const Eigen::MatrixXd& weights,
                                   const std::string& mode, const DesignOptions& opts) {
  AtomicPrivatePolicy pol;
  pol.nu = 0.0;
  pol.atoms = Eigen::MatrixXd::Zero(sc.num_routes(), m);
  pol.weights = weights;
  auto eq = nonparticipant_flow(sc, pol, 0.0);

  DesignSolution sol;
  sol.policy = pol;
  sol.y = eq.nonparticipant;
  sol.cost = social_cost(sc, pol.atoms, pol.weights, sol.y.values);
  auto res = obedience_residuals(sc, pol, sol.y.values);
  sol.maxObedienceResidual = res.max_obedience();
  sol.maxNashResidual = res.max_nash();
  sol.startsUsed = 0;
  sol.seed = opts.seed;
  sol.mode = mode;
  return sol;
}

// Feasible anchor points shared by all design modes: the no-information
// outcome, and when the atom budget allows it, the full-information outcome.
std::vector<Eigen::VectorXd> smart_starts(const detail::AlProblem& prob) {
  const RoutingScenario& sc = *prob.sc;
  std::vector<Eigen::VectorXd> starts;

  auto no_eq = bne_indirect(sc, no_information_policy(prob.s, 1), prob.nu);
  {
    Eigen::MatrixXd atoms(prob.n, prob.m);
    for (int k = 0; k < prob.m; ++k) atoms.col(k) = no_eq.message_flows[0].values;
    Eigen::MatrixXd w = Eigen::MatrixXd::Constant(prob.s, prob.m, 1.0 / prob.m);
    starts.push_back(prob.pack(atoms, w, no_eq.nonparticipant.values));
  }

  if (prob.m >= prob.s) {
    auto fi_eq = bne_indirect(sc, full_information_policy(prob.s, prob.s), prob.nu);
    Eigen::MatrixXd atoms(prob.n, prob.m);
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(prob.s, prob.m);
    for (int k = 0; k < prob.m; ++k) {
      const int src = std::min(k, prob.s - 1);
      atoms.col(k) = fi_eq.message_flows[src].values;
    }
    for (int r = 0; r < prob.s; ++r) w(r, r) = 1.0;
    starts.push_back(prob.pack(atoms, w, fi_eq.nonparticipant.values));
  }
  return starts;
}

DesignSolution finish_solution(const detail::AlProblem& prob,
                               const detail::AlCandidate& best, const std::string& mode,
                               const DesignOptions& opts) {
  DesignSolution sol;
  sol.policy.atoms = prob.atoms_of(best.v);
  sol.policy.weights = prob.weights_of(best.v);
  sol.policy.nu = prob.nu;
  sol.y = {prob.y_mass, prob.y_of(best.v)};
  sol.cost = best.cost;
  auto res = obedience_residuals(*prob.sc, sol.policy, sol.y.values);
  sol.maxObedienceResidual = res.max_obedience();
  sol.maxNashResidual = res.max_nash();
  sol.startsUsed = opts.starts;
  sol.seed = opts.seed;
  sol.mode = mode;
  return sol;
}

}  // namespace

DesignSolution optimize_private(const RoutingScenario& sc, double nu, int m,
                                const DesignOptions& opts) {
  if (m < 1) throw std::runtime_error("optimize_private: m must be >= 1");
  if (nu < 0.0 || nu > 1.0) throw std::runtime_error("nu must lie in [0, 1]");
  if (nu == 0.0)
    return prior_only_solution(sc, m, Eigen::MatrixXd::Constant(sc.num_states(), m, 1.0 / m),
                               "private", opts);

  detail::AlProblem prob;
  prob.init(sc, nu, m, /*opt_w=*/true, /*per_message=*/false, Eigen::MatrixXd());
  auto best = detail::run_multistart(prob, smart_starts(prob), opts);
  return finish_solution(prob, best, "private", opts);
}

DesignSolution optimize_diagonal(const RoutingScenario& sc, double nu,
                                 const DesignOptions& opts) {
  if (nu < 0.0 || nu > 1.0) throw std::runtime_error("nu must lie in [0, 1]");
  const int s = sc.num_states();
  if (nu == 0.0)
    return prior_only_solution(sc, s, Eigen::MatrixXd::Identity(s, s), "diagonal", opts);

  detail::AlProblem prob;
  prob.init(sc, nu, s, /*opt_w=*/false, /*per_message=*/false,
            Eigen::MatrixXd::Identity(s, s));
  auto best = detail::run_multistart(prob, smart_starts(prob), opts);
  return finish_solution(prob, best, "diagonal", opts);
}

LiftedPolicy lift_public_to_private(const RoutingScenario& sc, const PublicPolicy& pub,
                                    const Eigen::MatrixXd& flows, const RouteFlow& y) {
  if (flows.rows() != sc.num_routes() || flows.cols() != pub.num_messages())
    throw std::runtime_error("lift_public_to_private: dimension mismatch");
  check_row_stochastic(pub.weights);

  LiftedPolicy out;
  out.policy.atoms = flows;
  out.policy.weights = pub.weights;
  out.policy.nu = flows.cols() > 0 ? flows.col(0).sum() / sc.demand : 0.0;
  out.y = y;
  return out;
}

DesignSolution extend_policy(const RoutingScenario& sc, const DesignSolution& diagonal,
                             double nu2) {
  const double nu1 = diagonal.policy.nu;
  if (nu2 < nu1) throw std::runtime_error("extend_policy: nu2 must be >= nu1");
  if (nu2 == nu1) return diagonal;
  if (nu1 >= 1.0)
    throw std::runtime_error("extend_policy: cannot extend from nu1 = 1");

  // Shift mass from the non-participant flow into every atom along the
  // direction y / ((1 - nu1) T); aggregates are preserved coordinate-wise,
  // which keeps the cost and all feasibility conditions intact.
  const double ratio = (nu2 - nu1) / (1.0 - nu1);
  DesignSolution out = diagonal;
  out.policy.nu = nu2;
  out.y.mass = (1.0 - nu2) * sc.demand;
  out.y.values = diagonal.y.values * (1.0 - ratio);
  for (int k = 0; k < diagonal.policy.num_atoms(); ++k)
    out.policy.atoms.col(k) =
        (diagonal.policy.atoms.col(k) + diagonal.y.values) - out.y.values;

  out.cost = social_cost(sc, out.policy.atoms, out.policy.weights, out.y.values);
  auto res = obedience_residuals(sc, out.policy, out.y.values);
  out.maxObedienceResidual = res.max_obedience();
  out.maxNashResidual = res.max_nash();
  return out;
}

std::vector<SweepPoint> sweep_nu(const RoutingScenario& sc,
                                 const std::vector<double>& grid, SweepMode mode, int m,
                                 const DesignOptions& opts) {
  std::vector<double> nus = grid;
  std::sort(nus.begin(), nus.end());
  std::vector<SweepPoint> points;

  for (double nu : nus) {
    if (nu < 0.0 || nu > 1.0) throw std::runtime_error("sweep grid outside [0, 1]");
    SweepPoint pt;
    pt.nu = nu;
    switch (mode) {
      case SweepMode::Diagonal:
        pt.solution = optimize_diagonal(sc, nu, opts);
        break;
      case SweepMode::Private:
        pt.solution = optimize_private(sc, nu, m, opts);
        break;
      case SweepMode::Public:
        pt.solution = optimize_public(sc, nu, m, opts);
        break;
    }
    points.push_back(std::move(pt));
  }

  if (mode == SweepMode::Diagonal) {
    // Monotone post-processing: a cheaper earlier solution extended to the
    // current participation level replaces a worse fresh solve.
    for (size_t t = 1; t < points.size(); ++t) {
      for (size_t p = 0; p < t; ++p) {
        const auto& prev = points[p];
        const bool prev_extendable = prev.solution.policy.nu < 1.0;
        if (!prev_extendable && prev.nu != points[t].nu) continue;
        if (prev.solution.cost < points[t].solution.cost - 0.0) {
          DesignSolution ext = extend_policy(sc, prev.solution, points[t].nu);
          if (ext.cost < points[t].solution.cost) {
            points[t].solution = std::move(ext);
            points[t].extended = true;
          }
        }
      }
    }
  }
  return points;
}

}  // namespace routesig
