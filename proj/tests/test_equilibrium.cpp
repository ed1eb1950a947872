#include <doctest.h>

#include <random>

#include "routesig/equilibrium.hpp"
#include "routesig/simplex.hpp"
#include "test_support.hpp"

using namespace routesig;

namespace {

AtomicPrivatePolicy empty_policy(const RoutingScenario& sc, double nu) {
  AtomicPrivatePolicy p;
  p.nu = nu;
  p.atoms = Eigen::MatrixXd::Zero(sc.num_routes(), 1);
  p.weights = Eigen::MatrixXd::Ones(sc.num_states(), 1);
  return p;
}

}  // namespace

TEST_CASE("simplex projection basics") {
  Eigen::Vector3d v(0.2, 0.9, -0.4);
  Eigen::VectorXd p = project_to_simplex(v, 1.0);
  CHECK(p.sum() == doctest::Approx(1.0));
  CHECK(p.minCoeff() >= 0.0);
  // already-feasible points are fixed points
  Eigen::Vector3d w(0.25, 0.5, 0.25);
  CHECK((project_to_simplex(w, 1.0) - w).norm() < 1e-14);
  // zero mass collapses to zero
  CHECK(project_to_simplex(v, 0.0).norm() == 0.0);
}

TEST_CASE("nu = 1 leaves no non-participant mass") {
  RoutingScenario sc = test::two_link_affine();
  auto res = nonparticipant_flow(sc, empty_policy(sc, 1.0), 1.0);
  CHECK(res.nonparticipant.values.norm() == 0.0);
  CHECK(res.converged);
}

TEST_CASE("two identical links split demand evenly") {
  std::string doc = R"({
    "states": ["a"], "prior": [1.0],
    "links": ["l1", "l2"], "routes": [["l1"], ["l2"]], "demand": 4.0,
    "latency": { "a": {"l1": [1, 1], "l2": [1, 1]} }})";
  RoutingScenario sc = parse_scenario(doc);
  auto res = nonparticipant_flow(sc, empty_policy(sc, 0.0), 0.0);
  CHECK(res.nonparticipant.values[0] == doctest::Approx(2.0).epsilon(1e-6));
  CHECK(res.nonparticipant.values[1] == doctest::Approx(2.0).epsilon(1e-6));
}

TEST_CASE("prior equilibrium of the affine instance matches the closed form") {
  // Expected latencies are 11 + 2.8 f and 21 + 2 f, so y1 = 25/6.
  RoutingScenario sc = test::two_link_affine();
  auto res = nonparticipant_flow(sc, empty_policy(sc, 0.0), 0.0);
  CHECK(res.converged);
  CHECK(res.nonparticipant.values[0] == doctest::Approx(25.0 / 6.0).epsilon(1e-6));
  CHECK(res.nonparticipant.values[1] == doctest::Approx(5.0 / 6.0).epsilon(1e-6));
  CHECK(res.kktResidual <= 1e-8);

  // social cost of the prior flow: 5 * (11 + 2.8 * 25/6)
  Eigen::MatrixXd atoms = Eigen::MatrixXd::Zero(2, 1);
  Eigen::MatrixXd weights = Eigen::MatrixXd::Ones(2, 1);
  double cost = social_cost(sc, atoms, weights, res.nonparticipant.values);
  CHECK(cost == doctest::Approx(340.0 / 3.0).epsilon(1e-6));
}

TEST_CASE("social cost degenerate cases") {
  RoutingScenario sc = test::two_link_affine();
  Eigen::MatrixXd atoms = Eigen::MatrixXd::Zero(2, 1);
  Eigen::MatrixXd weights = Eigen::MatrixXd::Ones(2, 1);
  CHECK(social_cost(sc, atoms, weights, Eigen::Vector2d(0, 0)) == doctest::Approx(0.0));

  // single state, single atom: direct deterministic evaluation
  std::string doc = R"({
    "states": ["a"], "prior": [1.0],
    "links": ["l1", "l2"], "routes": [["l1"], ["l2"]], "demand": 3.0,
    "latency": { "a": {"l1": [2, 1], "l2": [4, 2]} }})";
  RoutingScenario one = parse_scenario(doc);
  Eigen::MatrixXd a1(2, 1);
  a1 << 2.0, 1.0;
  double direct = 2.0 * (2 + 2.0) + 1.0 * (4 + 2.0);
  CHECK(social_cost(one, a1, Eigen::MatrixXd::Ones(1, 1), Eigen::Vector2d(0, 0)) ==
        doctest::Approx(direct));
}

TEST_CASE("no-information policy reproduces the prior equilibrium aggregate") {
  RoutingScenario sc = test::two_link_affine();
  auto prior_eq = nonparticipant_flow(sc, empty_policy(sc, 0.0), 0.0);
  Eigen::VectorXd agg0 = prior_eq.nonparticipant.values;

  auto res = bne_indirect(sc, no_information_policy(2, 1), 0.4);
  CHECK(res.converged);
  CHECK((res.message_flows[0].values + res.nonparticipant.values - agg0)
            .cwiseAbs()
            .maxCoeff() < 1e-5);

  // with a wider message alphabet only the sent message pins the aggregate
  auto res2 = bne_indirect(sc, no_information_policy(2, 2), 0.4);
  CHECK((res2.message_flows[0].values + res2.nonparticipant.values - agg0)
            .cwiseAbs()
            .maxCoeff() < 1e-5);
}

TEST_CASE("single state, full participation gives the deterministic Wardrop flow") {
  std::string doc = R"({
    "states": ["a"], "prior": [1.0],
    "links": ["l1", "l2"], "routes": [["l1"], ["l2"]], "demand": 2.0,
    "latency": { "a": {"l1": [1, 2], "l2": [2, 1]} }})";
  RoutingScenario sc = parse_scenario(doc);
  auto res = bne_indirect(sc, Eigen::MatrixXd::Ones(1, 1), 1.0);
  // 1 + 2 f1 = 2 + (2 - f1)  =>  f1 = 1
  CHECK(res.message_flows[0].values[0] == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(res.kktResidual <= 1e-8);
}

TEST_CASE("full information at nu = 0.25 matches the reported split") {
  RoutingScenario sc = test::two_link_affine();
  auto res = bne_indirect(sc, full_information_policy(2, 2), 0.25);
  CHECK(res.converged);
  CHECK(res.nonparticipant.values[0] == doctest::Approx(3.23).epsilon(2e-3));
  CHECK(res.nonparticipant.values[1] == doctest::Approx(0.52).epsilon(1e-2));
  CHECK(res.message_flows[0].values[0] == doctest::Approx(1.25).epsilon(1e-5));
  CHECK(res.message_flows[1].values[1] == doctest::Approx(1.25).epsilon(1e-5));
}

TEST_CASE("first best values on the four study instances") {
  CHECK(first_best(test::two_link_affine()).cost == doctest::Approx(250.0 / 3.0).epsilon(1e-5));
  CHECK(first_best(test::wheatstone_affine()).cost == doctest::Approx(19.67).epsilon(1e-3));
  CHECK(first_best(test::wheatstone_quadratic()).cost == doctest::Approx(29.40).epsilon(1e-3));
}

TEST_CASE("aggregate flows are unique across independent starts") {
  RoutingScenario sc = test::two_link_affine();
  Eigen::MatrixXd pi(2, 2);
  pi << 0.7, 0.3, 0.2, 0.8;
  auto a = bne_indirect(sc, pi, 0.5);

  // restart from a perturbed deterministic point by solving a permuted copy
  EquilibriumOptions opts;
  opts.regularizer = 3e-9;  // different flat-face selection
  auto b = bne_indirect(sc, pi, 0.5, opts);

  for (size_t k = 0; k < a.message_flows.size(); ++k) {
    Eigen::VectorXd agg_a = a.message_flows[k].values + a.nonparticipant.values;
    Eigen::VectorXd agg_b = b.message_flows[k].values + b.nonparticipant.values;
    CHECK((agg_a - agg_b).cwiseAbs().maxCoeff() < 1e-6);
  }
}

TEST_CASE("participation fraction outside [0, 1] is rejected") {
  RoutingScenario sc = test::two_link_affine();
  CHECK_THROWS_AS(nonparticipant_flow(sc, empty_policy(sc, 0.0), 1.5),
                  std::runtime_error);
  CHECK_THROWS_AS(bne_indirect(sc, no_information_policy(2, 1), -0.1),
                  std::runtime_error);
}

TEST_CASE("dimension mismatches are rejected") {
  RoutingScenario sc = test::two_link_affine();
  Eigen::MatrixXd atoms = Eigen::MatrixXd::Zero(3, 1);  // three routes, wrong
  CHECK_THROWS_AS(social_cost(sc, atoms, Eigen::MatrixXd::Ones(2, 1),
                              Eigen::Vector3d(0, 0, 0)),
                  std::runtime_error);
  CHECK_THROWS_AS(sc.link_flows(Eigen::Vector3d(1, 2, 3)), std::runtime_error);
}

TEST_CASE("potential value is non-increasing in the iteration budget") {
  // the projected-gradient core only ever accepts descent steps, so a
  // larger iteration budget can never end higher
  RoutingScenario sc = test::wheatstone_quadratic();
  double prev = std::numeric_limits<double>::infinity();
  for (long budget : {3L, 10L, 40L, 200L, 2000L}) {
    EquilibriumOptions opts;
    opts.max_iterations = budget;
    auto res = bne_indirect(sc, full_information_policy(2, 2), 0.5, opts);
    CHECK(res.potentialValue <= prev + 1e-12);
    prev = res.potentialValue;
  }
}

TEST_CASE("first best lower-bounds feasible outcomes") {
  RoutingScenario sc = test::two_link_affine();
  double fb = first_best(sc).cost;
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 5; ++trial) {
    Eigen::MatrixXd atoms(2, 2);
    atoms.col(0) = sample_simplex(rng, 2, 2.5);
    atoms.col(1) = sample_simplex(rng, 2, 2.5);
    Eigen::MatrixXd weights(2, 2);
    for (int s = 0; s < 2; ++s) {
      Eigen::VectorXd row = sample_simplex(rng, 2, 1.0);
      weights.row(s) = row.transpose();
    }
    Eigen::VectorXd y = sample_simplex(rng, 2, 2.5);
    CHECK(fb <= social_cost(sc, atoms, weights, y) + 1e-9);
  }
}
