#pragma once

// Shared augmented-Lagrangian multistart engine behind optimize_private,
// optimize_diagonal and optimize_public. Internal to the library.

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "routesig/policies.hpp"
#include "routesig/private_design.hpp"
#include "routesig/scenario.hpp"
#include "routesig/simplex.hpp"

namespace routesig::detail {

// A design problem over (atoms | weight rows | y) on a product of simplices.
// Private problems sum the recommendation conditions over atoms; public
// problems keep one condition per message.
struct AlProblem {
  const RoutingScenario* sc = nullptr;
  double nu = 0.0;
  int m = 0;
  bool optimize_weights = true;
  bool per_message_constraints = false;  // public-style conditions
  Eigen::MatrixXd fixed_weights;         // used when !optimize_weights

  int n = 0, s = 0, E = 0;
  double atom_mass = 0.0, y_mass = 0.0;
  bool has_y = false;
  int atoms_off = 0, weights_off = -1, y_off = -1, dim = 0;
  std::vector<SimplexBlock> blocks;

  void init(const RoutingScenario& scenario, double nu_, int m_, bool opt_w,
            bool per_message, const Eigen::MatrixXd& fixed_w);

  Eigen::MatrixXd atoms_of(const Eigen::VectorXd& v) const;
  Eigen::MatrixXd weights_of(const Eigen::VectorXd& v) const;
  Eigen::VectorXd y_of(const Eigen::VectorXd& v) const;
  Eigen::VectorXd pack(const Eigen::MatrixXd& atoms, const Eigen::MatrixXd& weights,
                       const Eigen::VectorXd& y) const;

  int num_constraints() const;
  double cost(const Eigen::VectorXd& v) const;
  Eigen::VectorXd constraints(const Eigen::VectorXd& v) const;

  // Augmented-Lagrangian value and gradient at multipliers lambda, penalty rho.
  double al_value_grad(const Eigen::VectorXd& v, const Eigen::VectorXd& lambda,
                       double rho, Eigen::VectorXd& grad) const;
};

struct AlCandidate {
  Eigen::VectorXd v;
  double cost = 0.0;
  double feasibility = 0.0;  // max positive constraint value
};

AlCandidate al_solve_from(const AlProblem& prob, const Eigen::VectorXd& v0,
                          const DesignOptions& opts);

// Multistart driver: smart starts are used as given (and their unoptimized
// points kept as fallback candidates), the remaining starts are flat
// Dirichlet samples. Deterministic in (opts.starts, opts.seed); thread count
// does not affect the result.
AlCandidate run_multistart(const AlProblem& prob,
                           const std::vector<Eigen::VectorXd>& smart_starts,
                           const DesignOptions& opts);

int resolve_threads(int requested);

}  // namespace routesig::detail
