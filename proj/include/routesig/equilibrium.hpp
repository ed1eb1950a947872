#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "routesig/policies.hpp"
#include "routesig/scenario.hpp"

namespace routesig {

struct EquilibriumOptions {
  double grad_map_tol = 1e-9;
  double residual_tol = 1e-8;
  long max_iterations = 200000;
  double regularizer = 1e-9;  // vanishing strictly-convex term; picks a
                              // deterministic point on flat optimal faces
};

struct EquilibriumResult {
  std::vector<RouteFlow> message_flows;  // x^(k), one per message/atom
  RouteFlow nonparticipant;              // y
  double potentialValue = 0.0;
  double kktResidual = 0.0;  // max positive complementarity entry
  long iterations = 0;
  bool converged = false;
  std::string diagnostics;
};

// Bayes Nash flow of the agents outside the scheme, for fixed policy atoms:
// y minimizes the weighted Beckmann potential of the expected network, the
// policy-averaged flows of participants held fixed.
EquilibriumResult nonparticipant_flow(const RoutingScenario& sc,
                                      const AtomicPrivatePolicy& policy, double nu,
                                      const EquilibriumOptions& opts = {});

// Joint Bayes Nash flows (x^(1..m), y) for an indirect/public policy given by
// an s x m row-stochastic message matrix: minimizer of the joint convex
// potential. Aggregates x^(k)+y are unique for strictly increasing latencies.
EquilibriumResult bne_indirect(const RoutingScenario& sc,
                               const Eigen::MatrixXd& message_weights, double nu,
                               const EquilibriumOptions& opts = {});
EquilibriumResult bne_indirect(const RoutingScenario& sc, const PublicPolicy& policy,
                               double nu, const EquilibriumOptions& opts = {});

struct FirstBestResult {
  std::vector<RouteFlow> state_flows;  // one per state
  double cost = 0.0;                   // expected optimal potential value
  double totalLatencyCost = 0.0;       // expected total latency at those flows
};

// Planner benchmark: per state, the optimal value of the Beckmann program
// over P_n(T); cost is its prior expectation.
FirstBestResult first_best(const RoutingScenario& sc,
                           const EquilibriumOptions& opts = {});

// Expected total latency of an atomic policy outcome (atoms n x m, weights
// s x m, non-participant flow y).
double social_cost(const RoutingScenario& sc, const Eigen::MatrixXd& atoms,
                   const Eigen::MatrixXd& weights, const Eigen::VectorXd& y);

// Max positive entry of the per-message and non-participant complementarity
// conditions for flows (x^(1..m), y) under message weights pi(k|w).
double bne_residual(const RoutingScenario& sc, const Eigen::MatrixXd& message_weights,
                    const Eigen::MatrixXd& flows, const Eigen::VectorXd& y);

}  // namespace routesig
