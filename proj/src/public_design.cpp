#include "routesig/public_design.hpp"

#include <cmath>
#include <stdexcept>

#include "al_engine.hpp"

namespace routesig {

double PublicResiduals::max_message() const {
  double v = -std::numeric_limits<double>::infinity();
  for (const auto& mat : per_message) v = std::max(v, mat.maxCoeff());
  return per_message.empty() ? 0.0 : v;
}

double PublicResiduals::max_all() const {
  return std::max(max_message(), max_nonparticipant());
}

PublicResiduals public_residuals(const RoutingScenario& sc, const PublicPolicy& policy,
                                 const Eigen::MatrixXd& flows, const Eigen::VectorXd& y) {
  const int n = sc.num_routes();
  const int s = sc.num_states();
  const int m = policy.num_messages();
  if (flows.rows() != n || flows.cols() != m || y.size() != n)
    throw std::runtime_error("public_residuals: dimension mismatch");
  check_row_stochastic(policy.weights);

  const Eigen::MatrixXd jw = sc.prior.asDiagonal() * policy.weights;
  PublicResiduals out;
  out.per_message.assign(m, Eigen::MatrixXd::Zero(n, n));
  out.nonparticipant = Eigen::MatrixXd::Zero(n, n);

  for (int k = 0; k < m; ++k) {
    Eigen::VectorXd EL = Eigen::VectorXd::Zero(n);
    for (int w = 0; w < s; ++w)
      if (jw(w, k) != 0.0) EL += jw(w, k) * sc.route_latency(w, flows.col(k) + y);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        if (i == j) continue;
        out.per_message[k](i, j) = flows(i, k) * (EL[i] - EL[j]);
        out.nonparticipant(i, j) += y[i] * (EL[i] - EL[j]);
      }
  }
  return out;
}

PublicEvaluation evaluate_public(const RoutingScenario& sc, const PublicPolicy& policy,
                                 double nu, const EquilibriumOptions& opts) {
  PublicEvaluation ev;
  ev.equilibrium = bne_indirect(sc, policy, nu, opts);
  Eigen::MatrixXd flows(sc.num_routes(), policy.num_messages());
  for (int k = 0; k < policy.num_messages(); ++k)
    flows.col(k) = ev.equilibrium.message_flows[k].values;
  ev.cost = social_cost(sc, flows, policy.weights, ev.equilibrium.nonparticipant.values);
  return ev;
}

DesignSolution optimize_public(const RoutingScenario& sc, double nu, int m,
                               const DesignOptions& opts) {
  if (m < 1) throw std::runtime_error("optimize_public: m must be >= 1");
  if (nu < 0.0 || nu > 1.0) throw std::runtime_error("nu must lie in [0, 1]");

  if (nu == 0.0 || m == 1) {
    // The message matrix carries nothing: the outcome is the no-information
    // equilibrium for any weights.
    auto ev = evaluate_public(sc, no_information_policy(sc.num_states(), m), nu);
    DesignSolution sol;
    sol.policy.atoms = Eigen::MatrixXd(sc.num_routes(), m);
    for (int k = 0; k < m; ++k)
      sol.policy.atoms.col(k) = ev.equilibrium.message_flows[k].values;
    sol.policy.weights = no_information_policy(sc.num_states(), m).weights;
    sol.policy.nu = nu;
    sol.y = ev.equilibrium.nonparticipant;
    sol.cost = ev.cost;
    PublicPolicy pol{sol.policy.weights};
    auto res = public_residuals(sc, pol, sol.policy.atoms, sol.y.values);
    sol.maxObedienceResidual = res.max_message();
    sol.maxNashResidual = res.max_nonparticipant();
    sol.startsUsed = 0;
    sol.seed = opts.seed;
    sol.mode = "public";
    return sol;
  }

  detail::AlProblem prob;
  prob.init(sc, nu, m, /*opt_w=*/true, /*per_message=*/true, Eigen::MatrixXd());

  std::vector<Eigen::VectorXd> starts;
  {
    auto no_eq = bne_indirect(sc, no_information_policy(sc.num_states(), m), nu);
    Eigen::MatrixXd flows(prob.n, m);
    for (int k = 0; k < m; ++k) flows.col(k) = no_eq.message_flows[0].values;
    starts.push_back(
        prob.pack(flows, no_information_policy(prob.s, m).weights,
                  no_eq.nonparticipant.values));
  }
  if (m >= prob.s) {
    auto fi_eq = bne_indirect(sc, full_information_policy(prob.s, prob.s), nu);
    Eigen::MatrixXd flows(prob.n, m);
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(prob.s, m);
    for (int k = 0; k < m; ++k)
      flows.col(k) = fi_eq.message_flows[std::min(k, prob.s - 1)].values;
    for (int r = 0; r < prob.s; ++r) w(r, r) = 1.0;
    starts.push_back(prob.pack(flows, w, fi_eq.nonparticipant.values));
  }

  auto best = detail::run_multistart(prob, starts, opts);

  DesignSolution sol;
  sol.policy.atoms = prob.atoms_of(best.v);
  sol.policy.weights = prob.weights_of(best.v);
  sol.policy.nu = nu;
  sol.y = {prob.y_mass, prob.y_of(best.v)};
  sol.cost = best.cost;
  PublicPolicy pol{sol.policy.weights};
  auto res = public_residuals(sc, pol, sol.policy.atoms, sol.y.values);
  sol.maxObedienceResidual = res.max_message();
  sol.maxNashResidual = res.max_nonparticipant();
  sol.startsUsed = opts.starts;
  sol.seed = opts.seed;
  sol.mode = "public";
  return sol;
}

}  // namespace routesig
