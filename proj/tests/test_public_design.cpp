#include <doctest.h>

#include "routesig/public_design.hpp"
#include "test_support.hpp"

using namespace routesig;

TEST_CASE("equilibrium flows pass their own residual check") {
  RoutingScenario sc = test::two_link_affine();
  Eigen::MatrixXd pi(2, 2);
  pi << 0.8, 0.2, 0.3, 0.7;
  PublicPolicy pol{pi};
  auto eq = bne_indirect(sc, pol, 0.6);
  Eigen::MatrixXd flows(2, 2);
  for (int k = 0; k < 2; ++k) flows.col(k) = eq.message_flows[k].values;
  auto res = public_residuals(sc, pol, flows, eq.nonparticipant.values);
  CHECK(res.max_all() <= 1e-8);
}

TEST_CASE("published full-participation public block verifies up to rounding") {
  // the printed flows carry two decimals; the residual scales that rounding
  // by flows and slopes, so the achievable agreement is about 0.1
  RoutingScenario sc = test::two_link_affine();
  Eigen::MatrixXd flows(2, 2);
  flows << 4.17, 0.2, 0.83, 4.8;
  PublicPolicy pol{no_information_policy(2, 2).weights};
  auto res = public_residuals(sc, pol, flows, Eigen::Vector2d(0, 0));
  CHECK(res.max_all() <= 0.1);
}

TEST_CASE("swapping mass within a message creates a positive residual") {
  RoutingScenario sc = test::two_link_affine();
  PublicPolicy pol = full_information_policy(2, 2);
  auto eq = bne_indirect(sc, pol, 0.6);
  Eigen::MatrixXd flows(2, 2);
  for (int k = 0; k < 2; ++k) flows.col(k) = eq.message_flows[k].values;
  flows(0, 0) -= 0.5;
  flows(1, 0) += 0.5;
  auto res = public_residuals(sc, pol, flows, eq.nonparticipant.values);
  CHECK(res.max_all() > 1e-3);
}

TEST_CASE("one message carries nothing") {
  RoutingScenario sc = test::two_link_affine();
  DesignOptions opts;
  opts.starts = 10;
  auto sol = optimize_public(sc, 0.5, 1, opts);
  CHECK(sol.cost == doctest::Approx(340.0 / 3.0).epsilon(1e-6));
}

TEST_CASE("full information is optimal at low participation") {
  RoutingScenario sc = test::two_link_affine();
  DesignOptions opts;
  opts.starts = 100;
  opts.seed = 0;
  auto sol = optimize_public(sc, 0.25, 2, opts);
  auto fi = evaluate_public(sc, full_information_policy(2, 2), 0.25);
  CHECK(sol.cost <= fi.cost + 0.05);
  CHECK(std::abs(sol.cost - fi.cost) <= 0.05);
}

TEST_CASE("public cost is insensitive to the message count") {
  RoutingScenario sc = test::two_link_affine();
  DesignOptions opts;
  opts.starts = 60;
  opts.seed = 1;
  double c2 = optimize_public(sc, 0.5, 2, opts).cost;
  double c3 = optimize_public(sc, 0.5, 3, opts).cost;
  double c4 = optimize_public(sc, 0.5, 4, opts).cost;
  CHECK(std::abs(c2 - c3) <= 1e-2);
  CHECK(std::abs(c2 - c4) <= 1e-2);
}

TEST_CASE("design costs are ordered private <= public <= canonical") {
  RoutingScenario sc = test::two_link_affine();
  DesignOptions opts;
  opts.starts = 60;
  opts.seed = 0;
  const double nu = 0.5;
  double priv = optimize_private(sc, nu, 2, opts).cost;
  double pub = optimize_public(sc, nu, 2, opts).cost;
  double fi = evaluate_public(sc, full_information_policy(2, 2), nu).cost;
  double no = evaluate_public(sc, no_information_policy(2, 1), nu).cost;
  CHECK(priv <= pub + 1e-3);
  CHECK(pub <= std::min(fi, no) + 1e-3);
}

TEST_CASE("no-information cost does not depend on participation") {
  RoutingScenario sc = test::two_link_bpr();
  double base = evaluate_public(sc, no_information_policy(2, 1), 0.0).cost;
  for (double nu : {0.25, 0.5, 0.75, 1.0}) {
    double c = evaluate_public(sc, no_information_policy(2, 1), nu).cost;
    CHECK(c == doctest::Approx(base).epsilon(1e-6));
  }
}
