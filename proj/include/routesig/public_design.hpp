#pragma once

#include <Eigen/Dense>
#include <vector>

#include "routesig/equilibrium.hpp"
#include "routesig/policies.hpp"
#include "routesig/private_design.hpp"
#include "routesig/scenario.hpp"

namespace routesig {

// Signed Bayes Nash conditions for a public policy outcome, left-minus-right.
struct PublicResiduals {
  std::vector<Eigen::MatrixXd> per_message;  // one n x n matrix per message
  Eigen::MatrixXd nonparticipant;            // n x n

  double max_message() const;
  double max_nonparticipant() const { return nonparticipant.maxCoeff(); }
  double max_all() const;
};

PublicResiduals public_residuals(const RoutingScenario& sc, const PublicPolicy& policy,
                                 const Eigen::MatrixXd& flows, const Eigen::VectorXd& y);

// Cost and induced flows of a fixed public policy (inner equilibrium solve).
struct PublicEvaluation {
  EquilibriumResult equilibrium;
  double cost = 0.0;
};
PublicEvaluation evaluate_public(const RoutingScenario& sc, const PublicPolicy& policy,
                                 double nu, const EquilibriumOptions& opts = {});

// Best feasible multistart local solution of the public design problem,
// optimized jointly over (message matrix, per-message flows, y).
DesignSolution optimize_public(const RoutingScenario& sc, double nu, int m,
                               const DesignOptions& opts = {});

}  // namespace routesig
