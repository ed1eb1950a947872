#pragma once

#include <random>
#include <string>

#include "routesig/scenario.hpp"

namespace routesig::test {

inline std::string scenario_path(const std::string& name) {
  return std::string(ROUTESIG_SCENARIO_DIR) + "/" + name;
}

inline RoutingScenario two_link_affine() {
  return load_scenario(scenario_path("two_link_affine.scn"));
}
inline RoutingScenario two_link_bpr() {
  return load_scenario(scenario_path("two_link_bpr.scn"));
}
inline RoutingScenario wheatstone_affine() {
  return load_scenario(scenario_path("wheatstone_affine.scn"));
}
inline RoutingScenario wheatstone_quadratic() {
  return load_scenario(scenario_path("wheatstone_quadratic.scn"));
}

// Random two-link affine instance with coefficients in the ranges spanned by
// the parallel-network study: alpha_0 in [5, 25], alpha_1 in [1, 4].
inline RoutingScenario random_two_link_affine(std::mt19937_64& rng, double demand = 5.0) {
  std::uniform_real_distribution<double> a0(5.0, 25.0), a1(1.0, 4.0), pr(0.3, 0.7);
  RoutingScenario sc;
  sc.states = {"omega1", "omega2"};
  double p = pr(rng);
  sc.prior = Eigen::Vector2d(p, 1.0 - p);
  sc.links = {"l1", "l2"};
  sc.routes = {{0}, {1}};
  sc.demand = demand;
  for (int s = 0; s < 2; ++s) {
    std::vector<LatencyPolynomial> row;
    for (int e = 0; e < 2; ++e) {
      LatencyPolynomial poly;
      poly.coeffs = Eigen::Vector2d(a0(rng), a1(rng));
      row.push_back(poly);
    }
    sc.latency.push_back(row);
  }
  sc.digest = "random";
  sc.finalize();
  return sc;
}

}  // namespace routesig::test
