#include "routesig/simplex.hpp"

#include <algorithm>
#include <cmath>

namespace routesig {

Eigen::VectorXd project_to_simplex(const Eigen::VectorXd& v, double mass) {
  const int n = static_cast<int>(v.size());
  if (mass <= 0.0) return Eigen::VectorXd::Zero(n);

  std::vector<double> u(v.data(), v.data() + n);
  std::sort(u.begin(), u.end(), std::greater<double>());

  double cssv = 0.0, theta = 0.0;
  int rho = 0;
  for (int k = 0; k < n; ++k) {
    cssv += u[k];
    double t = (cssv - mass) / (k + 1);
    if (u[k] - t > 0.0) {
      rho = k + 1;
      theta = t;
    }
  }
  (void)rho;
  return (v.array() - theta).cwiseMax(0.0);
}

Eigen::VectorXd sample_simplex(std::mt19937_64& rng, int n, double mass) {
  if (mass <= 0.0) return Eigen::VectorXd::Zero(n);
  std::exponential_distribution<double> exp1(1.0);
  Eigen::VectorXd g(n);
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    g[i] = exp1(rng);
    total += g[i];
  }
  return g * (mass / total);
}

Eigen::VectorXd project_blocks(const Eigen::VectorXd& v,
                               const std::vector<SimplexBlock>& blocks) {
  Eigen::VectorXd out(v.size());
  for (const auto& b : blocks)
    out.segment(b.offset, b.size) = project_to_simplex(v.segment(b.offset, b.size), b.mass);
  return out;
}

PgResult projected_gradient(
    const std::function<double(const Eigen::VectorXd&, Eigen::VectorXd&)>& fg,
    const std::vector<SimplexBlock>& blocks, const Eigen::VectorXd& x0,
    const PgOptions& opts) {
  PgResult res;
  Eigen::VectorXd x = project_blocks(x0, blocks);
  Eigen::VectorXd grad(x.size()), gtrial(x.size());
  double f = fg(x, grad);
  double t = opts.initial_step;

  for (long it = 0; it < opts.max_iterations; ++it) {
    // Backtrack until the proximal sufficient-decrease condition holds.
    Eigen::VectorXd z;
    double fz = 0.0;
    bool accepted = false;
    for (int bt = 0; bt < 60; ++bt) {
      z = project_blocks(x - t * grad, blocks);
      Eigen::VectorXd d = z - x;
      double dn2 = d.squaredNorm();
      if (dn2 == 0.0) {
        res.x = x;
        res.value = f;
        res.grad_map_norm = 0.0;
        res.iterations = it;
        res.converged = true;
        return res;
      }
      fz = fg(z, gtrial);
      if (fz <= f + grad.dot(d) + dn2 / (2.0 * t)) {
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) {
      res.x = x;
      res.value = f;
      res.grad_map_norm = (x - project_blocks(x - t * grad, blocks)).norm() / t;
      res.iterations = it;
      res.converged = res.grad_map_norm <= opts.grad_map_tol;
      return res;
    }

    double gmap = (z - x).norm() / t;
    x = z;
    f = fz;
    grad = gtrial;
    if (gmap <= opts.grad_map_tol) {
      res.x = x;
      res.value = f;
      res.grad_map_norm = gmap;
      res.iterations = it + 1;
      res.converged = true;
      return res;
    }
    t *= 1.25;
  }

  res.x = x;
  res.value = f;
  Eigen::VectorXd z = project_blocks(x - t * grad, blocks);
  res.grad_map_norm = (z - x).norm() / t;
  res.iterations = opts.max_iterations;
  res.converged = res.grad_map_norm <= opts.grad_map_tol;
  return res;
}

}  // namespace routesig
