#include "routesig/equilibrium.hpp"

#include <cmath>
#include <stdexcept>

#include "routesig/simplex.hpp"

namespace routesig {

namespace {

// pi(k|w) * mu0(w), the measure of (atom k, state w) events.
Eigen::MatrixXd joint_weights(const RoutingScenario& sc, const Eigen::MatrixXd& weights) {
  if (weights.rows() != sc.num_states())
    throw std::runtime_error("policy matrix has wrong number of rows");
  return sc.prior.asDiagonal() * weights;  // s x m
}

double run_to_residual(
    const std::function<double(const Eigen::VectorXd&, Eigen::VectorXd&)>& fg_reg,
    const std::function<double(const Eigen::VectorXd&, Eigen::VectorXd&)>& fg,
    const std::function<double(const Eigen::VectorXd&)>& residual_of,
    const std::vector<SimplexBlock>& blocks, const Eigen::VectorXd& x0,
    const EquilibriumOptions& opts, Eigen::VectorXd& out, double& value,
    double& residual, long& iterations) {
  PgOptions pg;
  pg.grad_map_tol = opts.grad_map_tol;
  pg.max_iterations = opts.max_iterations / 4;

  // Regularized pass selects a deterministic point on flat optimal faces,
  // then the exact potential is polished until the complementarity
  // conditions hold.
  PgResult r = projected_gradient(fg_reg, blocks, x0, pg);
  iterations = r.iterations;
  Eigen::VectorXd x = r.x;

  double tol = opts.grad_map_tol;
  long budget = opts.max_iterations - iterations;
  double res = residual_of(x);
  while (res > opts.residual_tol && budget > 0 && tol > 1e-16) {
    PgOptions polish;
    polish.grad_map_tol = tol;
    polish.max_iterations = std::min(budget, opts.max_iterations / 4);
    PgResult p = projected_gradient(fg, blocks, x, polish);
    iterations += p.iterations;
    budget -= p.iterations;
    x = p.x;
    res = residual_of(x);
    if (p.iterations == 0) tol *= 1e-2;  // stationary at this tol, tighten
  }

  out = x;
  Eigen::VectorXd g(x.size());
  value = fg(x, g);
  residual = res;
  return res;
}

}  // namespace

double social_cost(const RoutingScenario& sc, const Eigen::MatrixXd& atoms,
                   const Eigen::MatrixXd& weights, const Eigen::VectorXd& y) {
  const int n = sc.num_routes();
  if (atoms.rows() != n || y.size() != n)
    throw std::runtime_error("social_cost: dimension mismatch");
  if (weights.cols() != atoms.cols())
    throw std::runtime_error("social_cost: weights/atoms mismatch");
  const Eigen::MatrixXd w = joint_weights(sc, weights);

  double cost = 0.0;
  for (int k = 0; k < atoms.cols(); ++k) {
    const Eigen::VectorXd agg = atoms.col(k) + y;
    const Eigen::VectorXd lf = sc.link_flows(agg);
    for (int s = 0; s < sc.num_states(); ++s) {
      if (w(s, k) == 0.0) continue;
      double state_cost = 0.0;
      for (int e = 0; e < sc.num_links(); ++e)
        state_cost += lf[e] * sc.latency[s][e].eval(lf[e]);
      cost += w(s, k) * state_cost;
    }
  }
  return cost;
}

double bne_residual(const RoutingScenario& sc, const Eigen::MatrixXd& message_weights,
                    const Eigen::MatrixXd& flows, const Eigen::VectorXd& y) {
  const int n = sc.num_routes();
  const int m = static_cast<int>(flows.cols());
  const Eigen::MatrixXd w = joint_weights(sc, message_weights);

  double worst = 0.0;
  Eigen::VectorXd yEL = Eigen::VectorXd::Zero(n);
  for (int k = 0; k < m; ++k) {
    Eigen::VectorXd EL = Eigen::VectorXd::Zero(n);
    for (int s = 0; s < sc.num_states(); ++s)
      if (w(s, k) != 0.0) EL += w(s, k) * sc.route_latency(s, flows.col(k) + y);
    yEL += EL;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        worst = std::max(worst, flows(i, k) * (EL[i] - EL[j]));
  }
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) worst = std::max(worst, y[i] * (yEL[i] - yEL[j]));
  return worst;
}

EquilibriumResult nonparticipant_flow(const RoutingScenario& sc,
                                      const AtomicPrivatePolicy& policy, double nu,
                                      const EquilibriumOptions& opts) {
  if (nu < 0.0 || nu > 1.0) throw std::runtime_error("nu must lie in [0, 1]");
  const int n = sc.num_routes();
  const int m = policy.num_atoms();
  const double y_mass = (1.0 - nu) * sc.demand;
  const Eigen::MatrixXd w = joint_weights(sc, policy.weights);

  std::vector<Eigen::VectorXd> atom_links(m);
  for (int k = 0; k < m; ++k) atom_links[k] = sc.link_flows(policy.atoms.col(k));

  auto value_grad = [&](const Eigen::VectorXd& y, Eigen::VectorXd& grad,
                        double reg) -> double {
    const Eigen::VectorXd yl = sc.link_flows(y);
    double val = 0.0;
    Eigen::VectorXd link_price = Eigen::VectorXd::Zero(sc.num_links());
    for (int k = 0; k < m; ++k) {
      for (int s = 0; s < sc.num_states(); ++s) {
        if (w(s, k) == 0.0) continue;
        for (int e = 0; e < sc.num_links(); ++e) {
          const auto& poly = sc.latency[s][e];
          val += w(s, k) * (poly.antideriv(atom_links[k][e] + yl[e]) -
                            poly.antideriv(atom_links[k][e]));
          link_price[e] += w(s, k) * poly.eval(atom_links[k][e] + yl[e]);
        }
      }
    }
    grad = sc.incidence().transpose() * link_price;
    if (reg > 0.0) {
      val += reg * y.squaredNorm();
      grad += 2.0 * reg * y;
    }
    return val;
  };

  auto fg_reg = [&](const Eigen::VectorXd& y, Eigen::VectorXd& g) {
    return value_grad(y, g, opts.regularizer);
  };
  auto fg = [&](const Eigen::VectorXd& y, Eigen::VectorXd& g) {
    return value_grad(y, g, 0.0);
  };
  auto residual_of = [&](const Eigen::VectorXd& y) {
    Eigen::MatrixXd flows = policy.atoms;
    return bne_residual(sc, policy.weights, flows, y);
  };

  EquilibriumResult res;
  res.message_flows.reserve(m);
  for (int k = 0; k < m; ++k)
    res.message_flows.push_back({nu * sc.demand, policy.atoms.col(k)});

  if (y_mass <= 0.0) {
    res.nonparticipant = {0.0, Eigen::VectorXd::Zero(n)};
    Eigen::VectorXd g(n);
    res.potentialValue = fg(res.nonparticipant.values, g);
    res.kktResidual = residual_of(res.nonparticipant.values);
    res.converged = true;
    return res;
  }

  std::vector<SimplexBlock> blocks{{0, n, y_mass}};
  Eigen::VectorXd y0 = Eigen::VectorXd::Constant(n, y_mass / n);
  Eigen::VectorXd y;
  double value, residual;
  long iters;
  run_to_residual(fg_reg, fg, residual_of, blocks, y0, opts, y, value, residual, iters);

  res.nonparticipant = {y_mass, y};
  res.potentialValue = value;
  res.kktResidual = residual;
  res.iterations = iters;
  res.converged = residual <= opts.residual_tol;
  res.diagnostics = "regularizer=" + std::to_string(opts.regularizer);
  return res;
}

EquilibriumResult bne_indirect(const RoutingScenario& sc,
                               const Eigen::MatrixXd& message_weights, double nu,
                               const EquilibriumOptions& opts) {
  if (nu < 0.0 || nu > 1.0) throw std::runtime_error("nu must lie in [0, 1]");
  check_row_stochastic(message_weights);
  const int n = sc.num_routes();
  const int m = static_cast<int>(message_weights.cols());
  const double x_mass = nu * sc.demand;
  const double y_mass = (1.0 - nu) * sc.demand;
  const Eigen::MatrixXd w = joint_weights(sc, message_weights);

  // Layout: m participant blocks then the non-participant block.
  std::vector<SimplexBlock> blocks;
  for (int k = 0; k < m; ++k) blocks.push_back({k * n, n, x_mass});
  blocks.push_back({m * n, n, y_mass});
  const int dim = (m + 1) * n;

  auto value_grad = [&](const Eigen::VectorXd& v, Eigen::VectorXd& grad,
                        double reg) -> double {
    grad.setZero();
    const Eigen::VectorXd yl = sc.link_flows(v.segment(m * n, n));
    double val = 0.0;
    for (int k = 0; k < m; ++k) {
      const Eigen::VectorXd xl = sc.link_flows(v.segment(k * n, n));
      Eigen::VectorXd link_price = Eigen::VectorXd::Zero(sc.num_links());
      for (int s = 0; s < sc.num_states(); ++s) {
        if (w(s, k) == 0.0) continue;
        for (int e = 0; e < sc.num_links(); ++e) {
          const auto& poly = sc.latency[s][e];
          val += w(s, k) * poly.antideriv(xl[e] + yl[e]);
          link_price[e] += w(s, k) * poly.eval(xl[e] + yl[e]);
        }
      }
      Eigen::VectorXd route_price = sc.incidence().transpose() * link_price;
      grad.segment(k * n, n) += route_price;
      grad.segment(m * n, n) += route_price;
    }
    if (reg > 0.0) {
      val += reg * v.squaredNorm();
      grad += 2.0 * reg * v;
    }
    return val;
  };

  auto fg_reg = [&](const Eigen::VectorXd& v, Eigen::VectorXd& g) {
    return value_grad(v, g, opts.regularizer);
  };
  auto fg = [&](const Eigen::VectorXd& v, Eigen::VectorXd& g) {
    return value_grad(v, g, 0.0);
  };
  auto residual_of = [&](const Eigen::VectorXd& v) {
    Eigen::MatrixXd flows(n, m);
    for (int k = 0; k < m; ++k) flows.col(k) = v.segment(k * n, n);
    return bne_residual(sc, message_weights, flows, v.segment(m * n, n));
  };

  Eigen::VectorXd v0(dim);
  for (int k = 0; k < m; ++k)
    v0.segment(k * n, n) = Eigen::VectorXd::Constant(n, x_mass / n);
  v0.segment(m * n, n) = Eigen::VectorXd::Constant(n, y_mass / n);

  Eigen::VectorXd v;
  double value, residual;
  long iters;
  run_to_residual(fg_reg, fg, residual_of, blocks, v0, opts, v, value, residual, iters);

  EquilibriumResult res;
  for (int k = 0; k < m; ++k) res.message_flows.push_back({x_mass, v.segment(k * n, n)});
  res.nonparticipant = {y_mass, v.segment(m * n, n)};
  res.potentialValue = value;
  res.kktResidual = residual;
  res.iterations = iters;
  res.converged = residual <= opts.residual_tol;
  res.diagnostics = "regularizer=" + std::to_string(opts.regularizer);
  return res;
}

EquilibriumResult bne_indirect(const RoutingScenario& sc, const PublicPolicy& policy,
                               double nu, const EquilibriumOptions& opts) {
  return bne_indirect(sc, policy.weights, nu, opts);
}

FirstBestResult first_best(const RoutingScenario& sc, const EquilibriumOptions& opts) {
  const int n = sc.num_routes();
  FirstBestResult out;
  out.cost = 0.0;
  out.totalLatencyCost = 0.0;

  for (int s = 0; s < sc.num_states(); ++s) {
    auto value_grad = [&](const Eigen::VectorXd& f, Eigen::VectorXd& grad,
                          double reg) -> double {
      const Eigen::VectorXd lf = sc.link_flows(f);
      double val = 0.0;
      Eigen::VectorXd link_price(sc.num_links());
      for (int e = 0; e < sc.num_links(); ++e) {
        val += sc.latency[s][e].antideriv(lf[e]);
        link_price[e] = sc.latency[s][e].eval(lf[e]);
      }
      grad = sc.incidence().transpose() * link_price;
      if (reg > 0.0) {
        val += reg * f.squaredNorm();
        grad += 2.0 * reg * f;
      }
      return val;
    };
    auto fg_reg = [&](const Eigen::VectorXd& f, Eigen::VectorXd& g) {
      return value_grad(f, g, opts.regularizer);
    };
    auto fg = [&](const Eigen::VectorXd& f, Eigen::VectorXd& g) {
      return value_grad(f, g, 0.0);
    };
    auto residual_of = [&](const Eigen::VectorXd& f) {
      const Eigen::VectorXd rl = sc.route_latency(s, f);
      double worst = 0.0;
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) worst = std::max(worst, f[i] * (rl[i] - rl[j]));
      return worst;
    };

    std::vector<SimplexBlock> blocks{{0, n, sc.demand}};
    Eigen::VectorXd f0 = Eigen::VectorXd::Constant(n, sc.demand / n);
    Eigen::VectorXd f;
    double value, residual;
    long iters;
    run_to_residual(fg_reg, fg, residual_of, blocks, f0, opts, f, value, residual, iters);

    out.state_flows.push_back({sc.demand, f});
    out.cost += sc.prior[s] * value;
    out.totalLatencyCost += sc.prior[s] * f.dot(sc.route_latency(s, f));
  }
  return out;
}

}  // namespace routesig
