#include "al_engine.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <random>
#include <stdexcept>
#include <thread>

namespace routesig::detail {

void AlProblem::init(const RoutingScenario& scenario, double nu_, int m_, bool opt_w,
                     bool per_message, const Eigen::MatrixXd& fixed_w) {
  sc = &scenario;
  nu = nu_;
  m = m_;
  optimize_weights = opt_w;
  per_message_constraints = per_message;
  fixed_weights = fixed_w;

  n = scenario.num_routes();
  s = scenario.num_states();
  E = scenario.num_links();
  atom_mass = nu * scenario.demand;
  y_mass = (1.0 - nu) * scenario.demand;
  has_y = y_mass > 0.0;

  atoms_off = 0;
  int off = n * m;
  if (optimize_weights) {
    weights_off = off;
    off += s * m;
  }
  if (has_y) {
    y_off = off;
    off += n;
  }
  dim = off;

  blocks.clear();
  for (int k = 0; k < m; ++k) blocks.push_back({atoms_off + k * n, n, atom_mass});
  if (optimize_weights)
    for (int w = 0; w < s; ++w) blocks.push_back({weights_off + w * m, m, 1.0});
  if (has_y) blocks.push_back({y_off, n, y_mass});
}

Eigen::MatrixXd AlProblem::atoms_of(const Eigen::VectorXd& v) const {
  Eigen::MatrixXd a(n, m);
  for (int k = 0; k < m; ++k) a.col(k) = v.segment(atoms_off + k * n, n);
  return a;
}

Eigen::MatrixXd AlProblem::weights_of(const Eigen::VectorXd& v) const {
  if (!optimize_weights) return fixed_weights;
  Eigen::MatrixXd w(s, m);
  for (int r = 0; r < s; ++r) w.row(r) = v.segment(weights_off + r * m, m).transpose();
  return w;
}

Eigen::VectorXd AlProblem::y_of(const Eigen::VectorXd& v) const {
  if (!has_y) return Eigen::VectorXd::Zero(n);
  return v.segment(y_off, n);
}

Eigen::VectorXd AlProblem::pack(const Eigen::MatrixXd& atoms,
                                const Eigen::MatrixXd& weights,
                                const Eigen::VectorXd& y) const {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(dim);
  for (int k = 0; k < m; ++k) v.segment(atoms_off + k * n, n) = atoms.col(k);
  if (optimize_weights)
    for (int r = 0; r < s; ++r) v.segment(weights_off + r * m, m) = weights.row(r).transpose();
  if (has_y) v.segment(y_off, n) = y;
  return v;
}

int AlProblem::num_constraints() const {
  const int pairs = n * (n - 1);
  const int rec = per_message_constraints ? m * pairs : pairs;
  return rec + (has_y ? pairs : 0);
}

namespace {

// Per-evaluation scratch: everything needed by cost, constraints and their
// gradients at one point.
struct EvalData {
  Eigen::MatrixXd atoms;   // n x m
  Eigen::MatrixXd weights; // s x m
  Eigen::VectorXd y;       // n
  Eigen::MatrixXd jw;      // s x m, pi(k|w) mu0(w)
  std::vector<Eigen::MatrixXd> RL;   // per k: s x n route latencies at agg_k
  std::vector<Eigen::MatrixXd> H;    // per k: n x n weighted conductance R' D R
  std::vector<Eigen::VectorXd> Jlin; // per k: route gradient of the cost term
  Eigen::VectorXd SCw;               // per (k*s + w): total latency in state w
  double cost = 0.0;
};

void evaluate(const AlProblem& P, const Eigen::VectorXd& v, EvalData& d,
              bool with_grad_data) {
  const RoutingScenario& sc = *P.sc;
  d.atoms = P.atoms_of(v);
  d.weights = P.weights_of(v);
  d.y = P.y_of(v);
  d.jw = sc.prior.asDiagonal() * d.weights;
  d.RL.assign(P.m, Eigen::MatrixXd::Zero(P.s, P.n));
  if (with_grad_data) {
    d.H.assign(P.m, Eigen::MatrixXd::Zero(P.n, P.n));
    d.Jlin.assign(P.m, Eigen::VectorXd::Zero(P.n));
    d.SCw = Eigen::VectorXd::Zero(P.m * P.s);
  }
  d.cost = 0.0;

  for (int k = 0; k < P.m; ++k) {
    const Eigen::VectorXd agg = d.atoms.col(k) + d.y;
    const Eigen::VectorXd lf = sc.link_flows(agg);
    Eigen::VectorXd wprice = Eigen::VectorXd::Zero(P.E);   // sum_w jw (l + f l')
    Eigen::VectorXd wslope = Eigen::VectorXd::Zero(P.E);   // sum_w jw l'
    for (int w = 0; w < P.s; ++w) {
      const double jww = d.jw(w, k);
      double total = 0.0;
      for (int e = 0; e < P.E; ++e) {
        const auto& poly = sc.latency[w][e];
        const double le = poly.eval(lf[e]);
        total += lf[e] * le;
        if (with_grad_data && jww != 0.0) {
          const double lde = poly.deriv(lf[e]);
          wprice[e] += jww * (le + lf[e] * lde);
          wslope[e] += jww * lde;
        }
      }
      d.RL[k].row(w) = sc.route_latency_from_links(w, lf).transpose();
      d.cost += jww * total;
      if (with_grad_data) d.SCw[k * P.s + w] = total;
    }
    if (with_grad_data) {
      d.Jlin[k] = sc.incidence().transpose() * wprice;
      d.H[k] = sc.incidence().transpose() * wslope.asDiagonal() * sc.incidence();
    }
  }
}

// D_k(i,j) = sum_w jw(w,k) (RL_k(w,i) - RL_k(w,j))
inline double Dk(const EvalData& d, int k, int i, int j) {
  double v = 0.0;
  for (int w = 0; w < d.jw.rows(); ++w)
    v += d.jw(w, k) * (d.RL[k](w, i) - d.RL[k](w, j));
  return v;
}

void constraint_values(const AlProblem& P, const EvalData& d, Eigen::VectorXd& g) {
  g.resize(P.num_constraints());
  int c = 0;
  if (P.per_message_constraints) {
    for (int k = 0; k < P.m; ++k)
      for (int i = 0; i < P.n; ++i)
        for (int j = 0; j < P.n; ++j)
          if (i != j) g[c++] = d.atoms(i, k) * Dk(d, k, i, j);
  } else {
    for (int i = 0; i < P.n; ++i)
      for (int j = 0; j < P.n; ++j) {
        if (i == j) continue;
        double v = 0.0;
        for (int k = 0; k < P.m; ++k) v += d.atoms(i, k) * Dk(d, k, i, j);
        g[c++] = v;
      }
  }
  if (P.has_y) {
    for (int i = 0; i < P.n; ++i)
      for (int j = 0; j < P.n; ++j) {
        if (i == j) continue;
        double v = 0.0;
        for (int k = 0; k < P.m; ++k) v += Dk(d, k, i, j);
        g[c++] = d.y[i] * v;
      }
  }
}

// Accumulates mult * grad of atoms(i,k)*D_k(i,j) into grad (single message k).
void add_rec_gradient(const AlProblem& P, const EvalData& d, int k, int i, int j,
                      double mult, Eigen::VectorXd& grad) {
  if (mult == 0.0) return;
  const double D = Dk(d, k, i, j);
  const double xi = d.atoms(i, k);
  grad[P.atoms_off + k * P.n + i] += mult * D;
  if (xi != 0.0) {
    const Eigen::VectorXd dD = (d.H[k].row(i) - d.H[k].row(j)).transpose();
    grad.segment(P.atoms_off + k * P.n, P.n) += mult * xi * dD;
    if (P.has_y) grad.segment(P.y_off, P.n) += mult * xi * dD;
    if (P.optimize_weights)
      for (int w = 0; w < P.s; ++w)
        grad[P.weights_off + w * P.m + k] +=
            mult * xi * P.sc->prior[w] * (d.RL[k](w, i) - d.RL[k](w, j));
  }
}

void add_nash_gradient(const AlProblem& P, const EvalData& d, int i, int j,
                       double mult, Eigen::VectorXd& grad) {
  if (mult == 0.0) return;
  const double yi = d.y[i];
  double Dsum = 0.0;
  for (int k = 0; k < P.m; ++k) Dsum += Dk(d, k, i, j);
  grad[P.y_off + i] += mult * Dsum;
  if (yi != 0.0) {
    for (int k = 0; k < P.m; ++k) {
      const Eigen::VectorXd dD = (d.H[k].row(i) - d.H[k].row(j)).transpose();
      grad.segment(P.atoms_off + k * P.n, P.n) += mult * yi * dD;
      grad.segment(P.y_off, P.n) += mult * yi * dD;
      if (P.optimize_weights)
        for (int w = 0; w < P.s; ++w)
          grad[P.weights_off + w * P.m + k] +=
              mult * yi * P.sc->prior[w] * (d.RL[k](w, i) - d.RL[k](w, j));
    }
  }
}

}  // namespace

double AlProblem::cost(const Eigen::VectorXd& v) const {
  EvalData d;
  evaluate(*this, v, d, false);
  return d.cost;
}

Eigen::VectorXd AlProblem::constraints(const Eigen::VectorXd& v) const {
  EvalData d;
  evaluate(*this, v, d, false);
  Eigen::VectorXd g;
  constraint_values(*this, d, g);
  return g;
}

double AlProblem::al_value_grad(const Eigen::VectorXd& v, const Eigen::VectorXd& lambda,
                                double rho, Eigen::VectorXd& grad) const {
  EvalData d;
  evaluate(*this, v, d, true);
  Eigen::VectorXd g;
  constraint_values(*this, d, g);

  grad.setZero(dim);
  // cost gradient
  for (int k = 0; k < m; ++k) {
    grad.segment(atoms_off + k * n, n) += d.Jlin[k];
    if (has_y) grad.segment(y_off, n) += d.Jlin[k];
    if (optimize_weights)
      for (int w = 0; w < s; ++w)
        grad[weights_off + w * m + k] += sc->prior[w] * d.SCw[k * s + w];
  }

  double val = d.cost;
  int c = 0;
  auto penalty = [&](double gc) {
    const double u = lambda[c] + rho * gc;
    const double up = std::max(0.0, u);
    val += (up * up - lambda[c] * lambda[c]) / (2.0 * rho);
    return up;  // multiplier on the constraint gradient
  };

  if (per_message_constraints) {
    for (int k = 0; k < m; ++k)
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          if (i != j) {
            const double mult = penalty(g[c]);
            add_rec_gradient(*this, d, k, i, j, mult, grad);
            ++c;
          }
  } else {
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        if (i != j) {
          const double mult = penalty(g[c]);
          if (mult != 0.0)
            for (int k = 0; k < m; ++k) add_rec_gradient(*this, d, k, i, j, mult, grad);
          ++c;
        }
  }
  if (has_y)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        if (i != j) {
          const double mult = penalty(g[c]);
          add_nash_gradient(*this, d, i, j, mult, grad);
          ++c;
        }
  return val;
}

AlCandidate al_solve_from(const AlProblem& prob, const Eigen::VectorXd& v0,
                          const DesignOptions& opts) {
  Eigen::VectorXd v = project_blocks(v0, prob.blocks);
  Eigen::VectorXd lambda = Eigen::VectorXd::Zero(prob.num_constraints());
  double rho = 1.0;
  double prev_feas = std::numeric_limits<double>::infinity();

  for (int outer = 0; outer < opts.outer_iterations; ++outer) {
    PgOptions pg;
    pg.grad_map_tol = std::max(1e-11, 1e-4 * std::pow(0.25, outer));
    pg.max_iterations = opts.inner_iterations;
    auto fg = [&](const Eigen::VectorXd& x, Eigen::VectorXd& grad) {
      return prob.al_value_grad(x, lambda, rho, grad);
    };
    PgResult r = projected_gradient(fg, prob.blocks, v, pg);
    v = r.x;

    Eigen::VectorXd g = prob.constraints(v);
    double feas = std::max(0.0, g.maxCoeff());
    const double target = opts.feasibility_tol * (1.0 + std::abs(prob.cost(v)));
    lambda = (lambda + rho * g).cwiseMax(0.0);
    if (feas <= target && r.grad_map_norm <= 1e-9) break;
    if (feas > 0.25 * prev_feas) rho = std::min(rho * 10.0, 1e9);
    prev_feas = feas;
  }

  AlCandidate out;
  out.v = v;
  out.cost = prob.cost(v);
  Eigen::VectorXd g = prob.constraints(v);
  out.feasibility = std::max(0.0, g.maxCoeff());
  return out;
}

int resolve_threads(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("ROUTESIG_THREADS")) {
    int t = std::atoi(env);
    if (t > 0) return t;
  }
  unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : static_cast<int>(hc);
}

AlCandidate run_multistart(const AlProblem& prob,
                           const std::vector<Eigen::VectorXd>& smart_starts,
                           const DesignOptions& opts) {
  const int total = std::max<int>(opts.starts, 1);
  std::vector<AlCandidate> results(total);
  std::vector<AlCandidate> anchors;

  // Unoptimized smart starts are kept as fallback candidates; the
  // no-information point among them guarantees a feasible outcome.
  for (const auto& v0 : smart_starts) {
    AlCandidate c;
    c.v = project_blocks(v0, prob.blocks);
    c.cost = prob.cost(c.v);
    Eigen::VectorXd g = prob.constraints(c.v);
    c.feasibility = std::max(0.0, g.maxCoeff());
    anchors.push_back(std::move(c));
  }

  auto start_point = [&](int idx) -> Eigen::VectorXd {
    if (idx < static_cast<int>(smart_starts.size())) return smart_starts[idx];
    std::mt19937_64 rng(opts.seed ^ (0x9E3779B97F4A7C15ull * (idx + 1)));
    Eigen::VectorXd v = Eigen::VectorXd::Zero(prob.dim);
    for (int k = 0; k < prob.m; ++k)
      v.segment(prob.atoms_off + k * prob.n, prob.n) =
          sample_simplex(rng, prob.n, prob.atom_mass);
    if (prob.optimize_weights)
      for (int w = 0; w < prob.s; ++w)
        v.segment(prob.weights_off + w * prob.m, prob.m) =
            sample_simplex(rng, prob.m, 1.0);
    if (prob.has_y)
      v.segment(prob.y_off, prob.n) = sample_simplex(rng, prob.n, prob.y_mass);
    return v;
  };

  const int threads = std::min(resolve_threads(opts.threads), total);
  std::vector<std::thread> pool;
  std::atomic<int> next{0};
  auto worker = [&]() {
    for (;;) {
      int idx = next.fetch_add(1);
      if (idx >= total) return;
      results[idx] = al_solve_from(prob, start_point(idx), opts);
    }
  };
  if (threads <= 1) {
    worker();
  } else {
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  // deterministic reduction: anchors first, then start order
  std::vector<AlCandidate> all = anchors;
  all.insert(all.end(), results.begin(), results.end());

  const AlCandidate* best = nullptr;
  for (const auto& c : all) {
    if (c.feasibility > 1e-6 * (1.0 + std::abs(c.cost))) continue;
    if (!best || c.cost < best->cost) best = &c;
  }
  if (!best)
    throw std::runtime_error(
        "design solver found no feasible candidate; this should be impossible "
        "since the no-information anchor is feasible");
  return *best;
}

}  // namespace routesig::detail
