#include <doctest.h>

#include <cstring>
#include <random>

#include "routesig/equilibrium.hpp"
#include "routesig/private_design.hpp"
#include "routesig/public_design.hpp"
#include "test_support.hpp"

using namespace routesig;

namespace {

AtomicPrivatePolicy make_policy(double nu, std::initializer_list<double> atoms_rowmajor,
                                int n, int m) {
  AtomicPrivatePolicy p;
  p.nu = nu;
  p.atoms = Eigen::MatrixXd(n, m);
  int idx = 0;
  for (double v : atoms_rowmajor) p.atoms(idx / m, idx % m) = v, ++idx;
  p.weights = Eigen::MatrixXd::Identity(n == 0 ? m : m, m);
  return p;
}

}  // namespace

TEST_CASE("published full-participation solution is obedient") {
  RoutingScenario sc = test::two_link_affine();
  AtomicPrivatePolicy pol = make_policy(1.0, {4.08, 2.87, 0.92, 2.13}, 2, 2);
  auto r = obedience_residuals(sc, pol, Eigen::Vector2d(0, 0));
  CHECK(r.max_obedience() <= 1e-2);
  CHECK(r.max_nash() <= 1e-2);
}

TEST_CASE("published half-participation solution is feasible and beatable") {
  RoutingScenario sc = test::two_link_affine();
  AtomicPrivatePolicy pol = make_policy(0.5, {1.58, 0.37, 0.92, 2.13}, 2, 2);
  Eigen::Vector2d y(2.5, 0.0);
  auto r = obedience_residuals(sc, pol, y);
  CHECK(r.max_obedience() <= 1e-2);
  CHECK(r.max_nash() <= 1e-2);

  double listed = social_cost(sc, pol.atoms, pol.weights, y);
  DesignOptions opts;
  opts.starts = 100;
  opts.seed = 0;
  auto sol = optimize_diagonal(sc, 0.5, opts);
  CHECK(sol.cost <= listed + 0.05);
}

TEST_CASE("a single-state Wardrop atom satisfies the recommendation conditions") {
  std::string doc = R"({
    "states": ["a"], "prior": [1.0],
    "links": ["l1", "l2"], "routes": [["l1"], ["l2"]], "demand": 2.0,
    "latency": { "a": {"l1": [1, 2], "l2": [2, 1]} }})";
  RoutingScenario sc = parse_scenario(doc);
  // Wardrop flow of the single state: 1 + 2f = 2 + (2 - f)  =>  f = 1
  AtomicPrivatePolicy pol = make_policy(1.0, {1.0, 1.0}, 2, 1);
  pol.weights = Eigen::MatrixXd::Ones(1, 1);
  auto r = obedience_residuals(sc, pol, Eigen::Vector2d(0, 0));
  CHECK(r.max_obedience() <= 1e-12);
  CHECK(r.max_nash() <= 1e-12);
}

TEST_CASE("routing everyone to a dominated route shows a positive residual") {
  RoutingScenario sc = test::two_link_affine();
  // all participants on route 2 in state w1, where route 1 is far better
  AtomicPrivatePolicy pol = make_policy(1.0, {0.0, 5.0, 5.0, 0.0}, 2, 2);
  auto r = obedience_residuals(sc, pol, Eigen::Vector2d(0, 0));
  CHECK(r.max_obedience() > 1.0);
}

TEST_CASE("zero participation reduces to the prior equilibrium") {
  RoutingScenario sc = test::two_link_affine();
  DesignOptions opts;
  opts.starts = 10;
  auto sol = optimize_private(sc, 0.0, 2, opts);
  CHECK(sol.cost == doctest::Approx(340.0 / 3.0).epsilon(1e-6));
  CHECK(sol.maxObedienceResidual <= 1e-8);
  CHECK(sol.maxNashResidual <= 1e-8);
}

TEST_CASE("full participation optimum beats the published block") {
  RoutingScenario sc = test::two_link_affine();
  AtomicPrivatePolicy pol = make_policy(1.0, {4.08, 2.87, 0.92, 2.13}, 2, 2);
  double listed = social_cost(sc, pol.atoms, pol.weights, Eigen::Vector2d(0, 0));

  DesignOptions opts;
  opts.starts = 100;
  opts.seed = 0;
  auto sol = optimize_private(sc, 1.0, 2, opts);
  CHECK(sol.cost <= listed + 0.05);
  CHECK(sol.maxObedienceResidual <= 1e-6 * (1.0 + std::abs(sol.cost)));
  CHECK(sol.maxNashResidual <= 1e-6 * (1.0 + std::abs(sol.cost)));
}

TEST_CASE("tiny instance matches an exhaustive grid search") {
  // T = 1, nu = 1, diagonal policies: two scalars on a 0.02 grid
  std::string doc = R"({
    "states": ["a", "b"], "prior": [0.6, 0.4],
    "links": ["l1", "l2"], "routes": [["l1"], ["l2"]], "demand": 1.0,
    "latency": { "a": {"l1": [5, 4], "l2": [25, 2]},
                 "b": {"l1": [20, 1], "l2": [15, 2]} }})";
  RoutingScenario sc = parse_scenario(doc);

  auto eval = [&](double x1, double x2, double& worst) {
    Eigen::MatrixXd atoms(2, 2);
    atoms << x1, x2, 1.0 - x1, 1.0 - x2;
    AtomicPrivatePolicy pol;
    pol.nu = 1.0;
    pol.atoms = atoms;
    pol.weights = Eigen::MatrixXd::Identity(2, 2);
    auto r = obedience_residuals(sc, pol, Eigen::Vector2d(0, 0));
    worst = std::max(r.max_obedience(), r.max_nash());
    return social_cost(sc, atoms, pol.weights, Eigen::Vector2d(0, 0));
  };

  double best = 1e100;
  for (int i = 0; i <= 50; ++i)
    for (int j = 0; j <= 50; ++j) {
      double worst;
      double c = eval(0.02 * i, 0.02 * j, worst);
      if (worst <= 1e-9 && c < best) best = c;
    }

  DesignOptions opts;
  opts.starts = 100;
  opts.seed = 0;
  auto sol = optimize_diagonal(sc, 1.0, opts);
  CHECK(sol.cost <= best + 1e-12);  // the grid is a restriction
  CHECK(best <= sol.cost + 1e-2);   // and a 0.02 grid is dense enough
}

TEST_CASE("tiny instance: atomic optimizer matches the full grid oracle") {
  // brute force over atoms AND weights on a 0.02 grid (51^4 points),
  // evaluated with a hand-rolled closed form for speed
  std::string doc = R"({
    "states": ["a", "b"], "prior": [0.6, 0.4],
    "links": ["l1", "l2"], "routes": [["l1"], ["l2"]], "demand": 1.0,
    "latency": { "a": {"l1": [5, 4], "l2": [25, 2]},
                 "b": {"l1": [20, 1], "l2": [15, 2]} }})";
  RoutingScenario sc = parse_scenario(doc);
  const double mu[2] = {0.6, 0.4};
  const double a0[2][2] = {{5, 25}, {20, 15}};
  const double a1[2][2] = {{4, 2}, {1, 2}};

  double best = 1e100;
  const int G = 50;
  for (int ia = 0; ia <= G; ++ia)
    for (int ib = 0; ib <= G; ++ib)
      for (int iw1 = 0; iw1 <= G; ++iw1)
        for (int iw2 = 0; iw2 <= G; ++iw2) {
          const double x1[2] = {ia / 50.0, ib / 50.0};  // atom k, route 1
          const double p1[2] = {iw1 / 50.0, iw2 / 50.0};  // pi(atom 1 | state)
          double J = 0.0, g12 = 0.0, g21 = 0.0;
          for (int w = 0; w < 2; ++w)
            for (int k = 0; k < 2; ++k) {
              const double pk = k == 0 ? p1[w] : 1.0 - p1[w];
              if (pk == 0.0) continue;
              const double f1 = x1[k], f2 = 1.0 - x1[k];
              const double l1 = a0[w][0] + a1[w][0] * f1;
              const double l2 = a0[w][1] + a1[w][1] * f2;
              const double wgt = mu[w] * pk;
              J += wgt * (f1 * l1 + f2 * l2);
              g12 += wgt * f1 * (l1 - l2);
              g21 += wgt * f2 * (l2 - l1);
            }
          if (g12 <= 1e-9 && g21 <= 1e-9 && J < best) best = J;
        }

  DesignOptions opts;
  opts.starts = 100;
  opts.seed = 0;
  auto sol = optimize_private(sc, 1.0, 2, opts);
  CHECK(sol.cost <= best + 1e-12);
  CHECK(best <= sol.cost + 1e-2);
}

TEST_CASE("duplicated states collapse to the single-state problem") {
  std::string one = R"({
    "states": ["a"], "prior": [1.0],
    "links": ["l1", "l2"], "routes": [["l1"], ["l2"]], "demand": 2.0,
    "latency": { "a": {"l1": [3, 2], "l2": [7, 1]} }})";
  std::string two = R"({
    "states": ["a", "b"], "prior": [0.35, 0.65],
    "links": ["l1", "l2"], "routes": [["l1"], ["l2"]], "demand": 2.0,
    "latency": { "a": {"l1": [3, 2], "l2": [7, 1]},
                 "b": {"l1": [3, 2], "l2": [7, 1]} }})";
  DesignOptions opts;
  opts.starts = 50;
  opts.seed = 2;
  auto s1 = optimize_diagonal(parse_scenario(one), 0.6, opts);
  auto s2 = optimize_diagonal(parse_scenario(two), 0.6, opts);
  CHECK(s1.cost == doctest::Approx(s2.cost).epsilon(1e-6));
}

TEST_CASE("diagonal and general private policies agree on a random instance") {
  std::mt19937_64 rng(41);
  RoutingScenario sc = test::random_two_link_affine(rng);
  DesignOptions opts;
  opts.starts = 60;
  opts.seed = 5;
  auto diag = optimize_diagonal(sc, 0.7, opts);
  auto priv = optimize_private(sc, 0.7, 6, opts);
  CHECK(priv.cost <= diag.cost + 1e-6 * (1.0 + std::abs(diag.cost)));
  CHECK(std::abs(priv.cost - diag.cost) <= 1e-3 * (1.0 + std::abs(diag.cost)));
}

TEST_CASE("extension keeps cost and aggregates bit-for-bit") {
  RoutingScenario sc = test::two_link_affine();
  DesignOptions opts;
  opts.starts = 40;
  opts.seed = 9;
  auto base = optimize_diagonal(sc, 0.5, opts);

  auto same = extend_policy(sc, base, 0.5);
  CHECK(same.cost == base.cost);
  CHECK((same.policy.atoms - base.policy.atoms).cwiseAbs().maxCoeff() == 0.0);

  auto ext = extend_policy(sc, base, 0.75);
  CHECK(std::memcmp(&ext.cost, &base.cost, sizeof(double)) == 0);
  for (int k = 0; k < 2; ++k)
    for (int i = 0; i < 2; ++i) {
      double a1 = base.policy.atoms(i, k) + base.y.values[i];
      double a2 = ext.policy.atoms(i, k) + ext.y.values[i];
      CHECK(a1 == a2);
    }
  CHECK(ext.y.values.sum() == doctest::Approx(0.25 * 5.0).epsilon(1e-12));
  CHECK(ext.maxObedienceResidual <= base.maxObedienceResidual + 1e-9);
  CHECK(ext.maxNashResidual <= base.maxNashResidual + 1e-9);

  CHECK_THROWS_AS(extend_policy(sc, base, 0.4), std::runtime_error);
  auto at_one = extend_policy(sc, base, 1.0);
  CHECK_THROWS_AS(extend_policy(sc, at_one, 1.0 + 1e-9), std::runtime_error);
}

TEST_CASE("diagonal sweep is non-increasing and anchored at the optimum") {
  RoutingScenario sc = test::two_link_affine();
  DesignOptions opts;
  opts.starts = 60;
  opts.seed = 0;
  auto pts = sweep_nu(sc, {0.0, 0.25, 0.5, 0.75, 1.0}, SweepMode::Diagonal, 2, opts);
  REQUIRE(pts.size() == 5);
  CHECK(pts[0].solution.cost == doctest::Approx(340.0 / 3.0).epsilon(1e-6));
  for (size_t t = 1; t < pts.size(); ++t)
    CHECK(pts[t].solution.cost <= pts[t - 1].solution.cost + 1e-6);
  // every reported point is genuinely feasible
  for (const auto& pt : pts) {
    double tol = 1e-6 * (1.0 + std::abs(pt.solution.cost));
    CHECK(pt.solution.maxObedienceResidual <= tol);
    CHECK(pt.solution.maxNashResidual <= tol);
  }

  auto single = sweep_nu(sc, {0.0}, SweepMode::Diagonal, 2, opts);
  REQUIRE(single.size() == 1);
  CHECK(single[0].solution.cost == doctest::Approx(340.0 / 3.0).epsilon(1e-6));
}

TEST_CASE("seeded runs are bit-identical and thread-count independent") {
  RoutingScenario sc = test::two_link_affine();
  DesignOptions a;
  a.starts = 30;
  a.seed = 123;
  a.threads = 1;
  DesignOptions b = a;
  b.threads = 4;

  auto s1 = optimize_private(sc, 0.5, 2, a);
  auto s2 = optimize_private(sc, 0.5, 2, b);
  CHECK(std::memcmp(&s1.cost, &s2.cost, sizeof(double)) == 0);
  CHECK(s1.policy.atoms == s2.policy.atoms);
  CHECK(s1.policy.weights == s2.policy.weights);
  CHECK(s1.y.values == s2.y.values);

  auto s3 = optimize_private(sc, 0.5, 2, a);
  CHECK(s1.policy.atoms == s3.policy.atoms);
}

TEST_CASE("the certified atom budget does not improve on two atoms") {
  // quartic two-link instance at full participation: the sufficient bound
  // is 12 atoms, but two already realize the optimum
  RoutingScenario sc = test::two_link_bpr();
  DesignOptions opts;
  opts.starts = 40;
  opts.seed = 0;
  CHECK(atom_bound(2, 2, 4) == 12);
  double c2 = optimize_private(sc, 1.0, 2, opts).cost;
  double c12 = optimize_private(sc, 1.0, 12, opts).cost;
  CHECK(std::abs(c2 - c12) <= 1e-2);
}

TEST_CASE("residual evaluation rejects mismatched shapes") {
  RoutingScenario sc = test::two_link_affine();
  AtomicPrivatePolicy pol;
  pol.nu = 0.5;
  pol.atoms = Eigen::MatrixXd::Zero(3, 2);  // wrong route count
  pol.weights = Eigen::MatrixXd::Identity(2, 2);
  CHECK_THROWS_AS(obedience_residuals(sc, pol, Eigen::Vector2d(0, 0)),
                  std::runtime_error);
}

TEST_CASE("no-information lift stays feasible at every participation level") {
  RoutingScenario sc = test::two_link_bpr();
  for (double nu : {0.0, 0.3, 0.7, 1.0}) {
    auto eq = bne_indirect(sc, no_information_policy(2, 1), nu);
    AtomicPrivatePolicy pol;
    pol.nu = nu;
    pol.atoms = eq.message_flows[0].values;
    pol.weights = Eigen::MatrixXd::Ones(2, 1);
    auto r = obedience_residuals(sc, pol, eq.nonparticipant.values);
    CHECK(r.max_obedience() <= 1e-7);
    CHECK(r.max_nash() <= 1e-7);
  }
}
