#include <doctest.h>

#include <random>

#include "routesig/equilibrium.hpp"
#include "routesig/private_design.hpp"
#include "routesig/public_design.hpp"
#include "test_support.hpp"

using namespace routesig;

TEST_CASE("canonical public policies") {
  PublicPolicy full = canonical_policy("full", 2, 2);
  CHECK(full.weights.isIdentity(0.0));

  PublicPolicy no1 = canonical_policy("no", 2, 1);
  CHECK(no1.weights.rows() == 2);
  CHECK(no1.weights.cols() == 1);
  CHECK(no1.weights.minCoeff() == 1.0);

  PublicPolicy no32 = canonical_policy("no", 3, 2);
  for (int r = 0; r < 3; ++r) {
    CHECK(no32.weights(r, 0) == 1.0);
    CHECK(no32.weights(r, 1) == 0.0);
  }

  CHECK_THROWS_AS(canonical_policy("full", 2, 3), std::runtime_error);
  CHECK_THROWS_AS(canonical_policy("bogus", 2, 2), std::runtime_error);
}

TEST_CASE("posterior of a single full-support atom carries no information") {
  RoutingScenario sc = test::two_link_affine();
  AtomicPrivatePolicy pol;
  pol.nu = 0.5;
  pol.atoms = Eigen::MatrixXd(2, 1);
  pol.atoms << 1.5, 1.0;
  pol.weights = Eigen::MatrixXd::Ones(2, 1);

  PosteriorTable table = posteriors(sc, pol);
  for (int i = 0; i < 2; ++i) {
    REQUIRE(table.recipient[i].has_value());
    Eigen::VectorXd marginal = table.recipient[i]->colwise().sum();
    CHECK(marginal[0] == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(marginal[1] == doctest::Approx(0.4).epsilon(1e-12));
  }
}

TEST_CASE("diagonal posteriors weight states by recommended mass") {
  // two states, atoms recommending route 1 with masses 2.0 and 0.5:
  // P(w1 | route 1 recommended) = 2.0 * 0.6 / (2.0 * 0.6 + 0.5 * 0.4)
  RoutingScenario sc = test::two_link_affine();
  AtomicPrivatePolicy pol;
  pol.nu = 0.5;
  pol.atoms = Eigen::MatrixXd(2, 2);
  pol.atoms << 2.0, 0.5, 0.5, 2.0;
  pol.weights = Eigen::MatrixXd::Identity(2, 2);

  PosteriorTable table = posteriors(sc, pol);
  REQUIRE(table.recipient[0].has_value());
  const double z = 2.0 * 0.6 + 0.5 * 0.4;
  CHECK((*table.recipient[0])(0, 0) == doctest::Approx(2.0 * 0.6 / z).epsilon(1e-12));
  CHECK((*table.recipient[0])(1, 1) == doctest::Approx(0.5 * 0.4 / z).epsilon(1e-12));
  CHECK((*table.recipient[0])(0, 1) == 0.0);
  CHECK(table.recipient[0]->sum() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(table.recipient[1]->sum() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("a route that is never recommended is flagged") {
  RoutingScenario sc = test::wheatstone_affine();
  AtomicPrivatePolicy pol;
  pol.nu = 0.4;
  pol.atoms = Eigen::MatrixXd::Zero(3, 2);
  pol.atoms(0, 0) = 1.0;
  pol.atoms(1, 1) = 1.0;
  pol.weights = Eigen::MatrixXd::Identity(2, 2);

  PosteriorTable table = posteriors(sc, pol);
  CHECK(!table.never_recommended[0]);
  CHECK(!table.never_recommended[1]);
  CHECK(table.never_recommended[2]);
  CHECK(!table.recipient[2].has_value());
  // outsiders know only the policy
  CHECK(table.non_recipient(0, 0) == doctest::Approx(0.5));
  CHECK(table.non_recipient(1, 1) == doctest::Approx(0.5));
}

TEST_CASE("atom bound follows s * C(D+n, D+1)") {
  CHECK(atom_bound(2, 2, 1) == 6);
  CHECK(atom_bound(2, 2, 4) == 12);
  CHECK(atom_bound(1, 2, 1) == 3);
  CHECK(atom_bound(2, 3, 2) == 2 * 10);  // C(5,3) = 10
  CHECK(atom_bound(3, 2, 0) == 3 * 2);   // C(2,1) = 2
  CHECK_THROWS_AS(atom_bound(0, 2, 1), std::runtime_error);
}

TEST_CASE("lifting a public outcome preserves flows, weights and cost") {
  RoutingScenario sc = test::two_link_affine();
  const double nu = 0.4;

  PublicPolicy no = no_information_policy(2, 1);
  auto ev = evaluate_public(sc, no, nu);
  Eigen::MatrixXd flows(2, 1);
  flows.col(0) = ev.equilibrium.message_flows[0].values;
  auto lifted = lift_public_to_private(sc, no, flows, ev.equilibrium.nonparticipant);
  CHECK(lifted.policy.num_atoms() == 1);
  CHECK(lifted.policy.nu == doctest::Approx(nu).epsilon(1e-9));
  double lifted_cost = social_cost(sc, lifted.policy.atoms, lifted.policy.weights,
                                   lifted.y.values);
  CHECK(lifted_cost == ev.cost);  // identical arithmetic, identical bits

  // residuals no worse than the public outcome's
  auto own = obedience_residuals(sc, lifted.policy, lifted.y.values);
  PublicPolicy pol = no;
  auto pub = public_residuals(sc, pol, flows, lifted.y.values);
  CHECK(own.max_obedience() <= pub.max_message() + 1e-9);
  CHECK(own.max_nash() <= pub.max_nonparticipant() + 1e-9);

  PublicPolicy full = full_information_policy(2, 2);
  auto evf = evaluate_public(sc, full, nu);
  Eigen::MatrixXd flows2(2, 2);
  for (int k = 0; k < 2; ++k) flows2.col(k) = evf.equilibrium.message_flows[k].values;
  auto lf = lift_public_to_private(sc, full, flows2, evf.equilibrium.nonparticipant);
  CHECK(lf.policy.weights.isIdentity(0.0));
  CHECK(lf.policy.num_atoms() == 2);
  CHECK(social_cost(sc, lf.policy.atoms, lf.policy.weights, lf.y.values) == evf.cost);
}

TEST_CASE("row stochastic validation rejects bad matrices") {
  Eigen::MatrixXd bad(2, 2);
  bad << 0.5, 0.6, 1.0, 0.0;
  CHECK_THROWS_AS(check_row_stochastic(bad), std::runtime_error);
  bad << -0.1, 1.1, 1.0, 0.0;
  CHECK_THROWS_AS(check_row_stochastic(bad), std::runtime_error);
}
