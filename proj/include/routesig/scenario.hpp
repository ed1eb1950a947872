#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace routesig {

// Polynomial link latency with nonnegative coefficients,
// ell(f) = sum_d coeffs[d] * f^d. Nonnegative coefficients make the
// latency non-negative and non-decreasing on [0, inf).
struct LatencyPolynomial {
  Eigen::VectorXd coeffs;  // coeffs[d] multiplies f^d

  int degree() const { return static_cast<int>(coeffs.size()) - 1; }

  double eval(double f) const;       // ell(f)
  double deriv(double f) const;      // ell'(f)
  double antideriv(double f) const;  // integral of ell over [0, f]
};

// Flow vector over the routes of a scenario together with its total mass.
// Valid flows live on the simplex {v >= 0, sum v = mass}.
struct RouteFlow {
  double mass = 0.0;
  Eigen::VectorXd values;

  double simplex_gap() const { return values.sum() - mass; }
};

// Immutable game data: states with an interior prior, a route set over
// links, per-(state, link) polynomial latencies, and a total demand.
// Parallel networks are the special case route i = {link i}.
class RoutingScenario {
 public:
  std::vector<std::string> states;
  Eigen::VectorXd prior;
  std::vector<std::string> links;
  std::vector<std::vector<int>> routes;  // link indices per route
  std::vector<std::vector<LatencyPolynomial>> latency;  // [state][link]
  double demand = 0.0;
  std::string digest;  // content hash of the source document

  int num_states() const { return static_cast<int>(states.size()); }
  int num_routes() const { return static_cast<int>(routes.size()); }
  int num_links() const { return static_cast<int>(links.size()); }
  int max_degree() const;
  bool is_parallel() const;

  // 0/1 incidence, row = link, col = route.
  const Eigen::MatrixXd& incidence() const { return incidence_; }

  // Link flows induced by a route flow vector: x~_e = sum_{i: e in i} f_i.
  Eigen::VectorXd link_flows(const Eigen::VectorXd& route_flow) const;

  // Per-route latency at an aggregate route flow,
  // entry i = sum_{e in i} ell_{state,e}(x~_e).
  Eigen::VectorXd route_latency(int state, const Eigen::VectorXd& aggregate) const;
  Eigen::VectorXd route_latency(const std::string& state,
                                const Eigen::VectorXd& aggregate) const;

  // Same, but evaluated at given link flows.
  Eigen::VectorXd route_latency_from_links(int state,
                                           const Eigen::VectorXd& link_flow) const;

  // Per-route marginal of the Beckmann potential sum_e int_0^{x~_e} ell.
  double potential(int state, const Eigen::VectorXd& aggregate) const;

  // Called once after construction; throws on any violated invariant.
  void validate() const;
  void finalize();  // builds incidence, then validates

 private:
  Eigen::MatrixXd incidence_;
};

// Parses and validates a scenario document (JSON with fields
// states/prior/links/routes/demand/latency). Throws std::runtime_error
// with a message naming the violated invariant.
RoutingScenario load_scenario(const std::string& path);
RoutingScenario parse_scenario(const std::string& text);

}  // namespace routesig
