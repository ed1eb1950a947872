#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "routesig/equilibrium.hpp"
#include "routesig/policies.hpp"
#include "routesig/scenario.hpp"

namespace routesig {

// Signed constraint values in left-minus-right form; entries <= 0 are
// satisfied, the diagonal is identically zero.
struct ObedienceResiduals {
  Eigen::MatrixXd obedience;  // n x n, recommendation i against alternative j
  Eigen::MatrixXd nash;       // n x n, non-participant conditions

  double max_obedience() const { return obedience.maxCoeff(); }
  double max_nash() const { return nash.maxCoeff(); }
};

ObedienceResiduals obedience_residuals(const RoutingScenario& sc,
                                       const AtomicPrivatePolicy& policy,
                                       const Eigen::VectorXd& y);

// Joint posteriors induced by an atomic policy (recommendation recipients
// condition on their recommended route; outsiders only know the policy).
PosteriorTable posteriors(const RoutingScenario& sc, const AtomicPrivatePolicy& policy);

// Number of atoms sufficient for an optimal policy: s * C(D+n, D+1).
long long atom_bound(int s, int n, int D);

struct DesignOptions {
  int starts = 100;
  std::uint64_t seed = 0;
  int threads = 0;           // 0 = hardware concurrency
  double feasibility_tol = 1e-8;  // absolute floor; scaled by (1 + |cost|)
  long inner_iterations = 4000;
  int outer_iterations = 40;
};

// Best feasible local solution of the atomic design problem over multistart.
// Deterministic for a fixed (scenario, nu, m, starts, seed).
DesignSolution optimize_private(const RoutingScenario& sc, double nu, int m,
                                const DesignOptions& opts = {});

// Same with m = s and the recommendation matrix pinned to the identity.
DesignSolution optimize_diagonal(const RoutingScenario& sc, double nu,
                                 const DesignOptions& opts = {});

// Realizes a public policy outcome as an m-atomic private policy with the
// same flows, weights, non-participant flow and cost.
struct LiftedPolicy {
  AtomicPrivatePolicy policy;
  RouteFlow y;
};
LiftedPolicy lift_public_to_private(const RoutingScenario& sc, const PublicPolicy& pub,
                                    const Eigen::MatrixXd& flows,
                                    const RouteFlow& y);

// Constructive extension of a diagonal solution from nu1 to nu2 >= nu1:
// participant atoms absorb non-participant mass along a fixed direction, so
// aggregates, cost and feasibility are all preserved.
DesignSolution extend_policy(const RoutingScenario& sc, const DesignSolution& diagonal,
                             double nu2);

enum class SweepMode { Diagonal, Private, Public };

struct SweepPoint {
  double nu = 0.0;
  DesignSolution solution;
  bool extended = false;  // true when realized by extending an earlier point
};

// Per-nu design solutions over a grid. In diagonal mode the reported curve is
// post-processed with extend_policy so it is non-increasing in nu.
std::vector<SweepPoint> sweep_nu(const RoutingScenario& sc,
                                 const std::vector<double>& grid, SweepMode mode,
                                 int m, const DesignOptions& opts = {});

}  // namespace routesig
