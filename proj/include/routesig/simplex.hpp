#pragma once

#include <Eigen/Dense>
#include <functional>
#include <random>
#include <vector>

namespace routesig {

// Euclidean projection onto {v >= 0, sum v = mass} via the sort-based
// threshold rule. mass = 0 returns the zero vector.
Eigen::VectorXd project_to_simplex(const Eigen::VectorXd& v, double mass);

// Uniform (flat Dirichlet) sample on the simplex of the given mass.
Eigen::VectorXd sample_simplex(std::mt19937_64& rng, int n, double mass);

// One variable block constrained to a simplex of the given mass.
struct SimplexBlock {
  int offset = 0;
  int size = 0;
  double mass = 0.0;
};

struct PgOptions {
  double grad_map_tol = 1e-9;   // stop when ||x - prox(x)||/t is below this
  long max_iterations = 200000;
  double initial_step = 1.0;
};

struct PgResult {
  Eigen::VectorXd x;
  double value = 0.0;
  double grad_map_norm = 0.0;
  long iterations = 0;
  bool converged = false;
};

// Monotone projected gradient with backtracking on a product of simplices.
// fg must return f(x) and fill grad. The objective never increases across
// iterations (sufficient-decrease backtracking).
PgResult projected_gradient(
    const std::function<double(const Eigen::VectorXd&, Eigen::VectorXd&)>& fg,
    const std::vector<SimplexBlock>& blocks, const Eigen::VectorXd& x0,
    const PgOptions& opts);

Eigen::VectorXd project_blocks(const Eigen::VectorXd& v,
                               const std::vector<SimplexBlock>& blocks);

}  // namespace routesig
