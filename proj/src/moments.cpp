#include "routesig/moments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace routesig {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// ---------------------------------------------------------------------------
// sparse polynomials over n variables (exponent-vector keyed)

using Poly = std::map<Monomial, double>;

void poly_add(Poly& p, const Monomial& mono, double c) {
  if (c == 0.0) return;
  p[mono] += c;
}

Poly poly_mul(const Poly& a, const Poly& b) {
  Poly out;
  for (const auto& [ma, ca] : a)
    for (const auto& [mb, cb] : b) {
      Monomial m(ma.size());
      for (size_t i = 0; i < m.size(); ++i) m[i] = ma[i] + mb[i];
      out[m] += ca * cb;
    }
  return out;
}

Poly poly_const(int n, double c) {
  Poly p;
  poly_add(p, Monomial(n, 0), c);
  return p;
}

Poly poly_pow(const Poly& base, int d, int n) {
  Poly out = poly_const(n, 1.0);
  for (int i = 0; i < d; ++i) out = poly_mul(out, base);
  return out;
}

int degree_of(const Monomial& m) {
  int d = 0;
  for (int e : m) d += e;
  return d;
}

// all monomials of exactly degree d over n variables, graded-lex
void enumerate_degree(int n, int d, Monomial& cur, int pos,
                      std::vector<Monomial>& out) {
  if (pos == n - 1) {
    cur[pos] = d;
    out.push_back(cur);
    return;
  }
  for (int e = d; e >= 0; --e) {
    cur[pos] = e;
    enumerate_degree(n, d - e, cur, pos + 1, out);
  }
}

std::vector<Monomial> dedup_basis(int n, int maxdeg) {
  std::vector<Monomial> out;
  Monomial cur(n, 0);
  for (int d = 0; d <= maxdeg; ++d) enumerate_degree(n, d, cur, 0, out);
  return out;
}

// Map from a monomial (degree <= 2h) to a canonical moment-matrix cell.
struct CellMap {
  std::map<Monomial, std::pair<int, int>> cell;
  std::map<Monomial, std::vector<std::pair<int, int>>> all_cells;

  void build(const std::vector<Monomial>& basis) {
    const int m = static_cast<int>(basis.size());
    for (int p = 0; p < m; ++p)
      for (int q = p; q < m; ++q) {
        Monomial mono(basis[p].size());
        for (size_t i = 0; i < mono.size(); ++i) mono[i] = basis[p][i] + basis[q][i];
        all_cells[mono].push_back({p, q});
        if (!cell.count(mono)) cell[mono] = {p, q};
      }
  }
};

void add_cell(MatrixXd& Q, std::pair<int, int> pq, double c) {
  auto [p, q] = pq;
  if (p == q) {
    Q(p, p) += c;
  } else {
    Q(p, q) += 0.5 * c;
    Q(q, p) += 0.5 * c;
  }
}

MatrixXd matrix_from_poly(const CellMap& cm, int size, const Poly& poly) {
  MatrixXd Q = MatrixXd::Zero(size, size);
  for (const auto& [mono, c] : poly) {
    auto it = cm.cell.find(mono);
    if (it == cm.cell.end())
      throw std::runtime_error("moment basis too small for polynomial degree");
    add_cell(Q, it->second, c);
  }
  return Q;
}

// ---------------------------------------------------------------------------
// quadratic forms over zhat = (x^{w_1}, ..., x^{w_s}, y) for the affine form

// affine form a: a[0] + sum_p a[1+p] zhat_p
void add_product_form(MatrixXd& Q, int p, const VectorXd& a, double weight) {
  const int N = static_cast<int>(Q.rows());
  Q(0, 1 + p) += 0.5 * weight * a[0];
  Q(1 + p, 0) += 0.5 * weight * a[0];
  for (int q = 0; q + 1 < N; ++q) {
    if (a[1 + q] == 0.0) continue;
    Q(1 + p, 1 + q) += 0.5 * weight * a[1 + q];
    Q(1 + q, 1 + p) += 0.5 * weight * a[1 + q];
  }
}

}  // namespace

int moment_basis_degree(int D) { return (D + 2) / 2; }  // ceil((D+1)/2)

std::vector<std::vector<int>> monomial_vector(int n, int D) {
  const int h = moment_basis_degree(D);
  std::vector<std::vector<int>> out;
  out.push_back({});  // the constant monomial
  std::vector<std::vector<int>> prev{{}};
  for (int d = 1; d <= h; ++d) {
    std::vector<std::vector<int>> cur;
    for (const auto& t : prev)
      for (int i = 1; i <= n; ++i) {
        std::vector<int> u = t;
        u.push_back(i);
        cur.push_back(u);
      }
    out.insert(out.end(), cur.begin(), cur.end());
    prev = std::move(cur);
  }
  return out;
}

// ---------------------------------------------------------------------------
// diagonal design relaxation (affine latencies)

MomentProgram build_diagonal_sdp(const RoutingScenario& sc, double nu) {
  if (sc.max_degree() != 1)
    throw std::runtime_error("build_diagonal_sdp requires affine latencies (degree 1)");
  if (nu < 0.0 || nu > 1.0) throw std::runtime_error("nu must lie in [0, 1]");

  const int n = sc.num_routes();
  const int s = sc.num_states();
  const int N = (s + 1) * n + 1;
  const double a_mass = nu * sc.demand;
  const double b_mass = (1.0 - nu) * sc.demand;

  MomentProgram prog;
  prog.diagonal_form = true;
  prog.s = s;
  prog.n = n;
  prog.participant_mass = a_mass;
  prog.outsider_mass = b_mass;

  MomentBlock block;
  block.name = "zhat";
  {
    Monomial zero((s + 1) * n, 0);
    block.basis.push_back(zero);
    for (int p = 0; p < (s + 1) * n; ++p) {
      Monomial m = zero;
      m[p] = 1;
      block.basis.push_back(m);
    }
  }
  prog.blocks.push_back(block);

  auto xidx = [&](int w, int i) { return w * n + i; };  // zhat coordinate
  auto yidx = [&](int i) { return s * n + i; };

  // affine route latency over zhat for the state-w aggregate x^w + y
  auto latency_form = [&](int w, int i) {
    VectorXd a = VectorXd::Zero(N);
    for (int e : sc.routes[i]) {
      a[0] += sc.latency[w][e].coeffs[0];
      const double slope = sc.latency[w][e].coeffs.size() > 1
                               ? sc.latency[w][e].coeffs[1]
                               : 0.0;
      if (slope == 0.0) continue;
      for (int r = 0; r < n; ++r) {
        if (sc.incidence()(e, r) == 0.0) continue;
        a[1 + xidx(w, r)] += slope;
        a[1 + yidx(r)] += slope;
      }
    }
    return a;
  };

  prog.C = MatrixXd::Zero(N, N);
  prog.A.assign(n * n, MatrixXd::Zero(N, N));
  prog.B.assign(n * n, MatrixXd::Zero(N, N));

  for (int w = 0; w < s; ++w) {
    const double mu = sc.prior[w];
    std::vector<VectorXd> L(n);
    for (int i = 0; i < n; ++i) L[i] = latency_form(w, i);

    for (int i = 0; i < n; ++i) {
      add_product_form(prog.C, xidx(w, i), L[i], mu);
      add_product_form(prog.C, yidx(i), L[i], mu);
      for (int j = 0; j < n; ++j) {
        if (i == j) continue;
        const VectorXd gain = L[j] - L[i];  // alternative minus recommended
        add_product_form(prog.A[i * n + j], xidx(w, i), gain, mu);
        add_product_form(prog.B[i * n + j], yidx(i), gain, mu);
      }
    }
  }

  prog.Sx.assign(s, MatrixXd::Zero(N, N));
  for (int w = 0; w < s; ++w) {
    prog.Sx[w](0, 0) = -a_mass;
    for (int i = 0; i < n; ++i) {
      prog.Sx[w](0, 1 + xidx(w, i)) = 0.5;
      prog.Sx[w](1 + xidx(w, i), 0) = 0.5;
    }
  }
  prog.Sy = MatrixXd::Zero(N, N);
  prog.Sy(0, 0) = -b_mass;
  for (int i = 0; i < n; ++i) {
    prog.Sy(0, 1 + yidx(i)) = 0.5;
    prog.Sy(1 + yidx(i), 0) = 0.5;
  }

  prog.Tx.assign(s * n, MatrixXd::Zero(N, N));
  prog.Ty.assign(n, MatrixXd::Zero(N, N));
  for (int w = 0; w < s; ++w)
    for (int i = 0; i < n; ++i) {
      MatrixXd& T = prog.Tx[w * n + i];
      T(0, 1 + xidx(w, i)) = -0.5 * a_mass;
      T(1 + xidx(w, i), 0) = -0.5 * a_mass;
      for (int j = 0; j < n; ++j) {
        T(1 + xidx(w, i), 1 + xidx(w, j)) += 0.5;
        T(1 + xidx(w, j), 1 + xidx(w, i)) += 0.5;
      }
    }
  for (int i = 0; i < n; ++i) {
    MatrixXd& T = prog.Ty[i];
    T(0, 1 + yidx(i)) = -0.5 * b_mass;
    T(1 + yidx(i), 0) = -0.5 * b_mass;
    for (int j = 0; j < n; ++j) {
      T(1 + yidx(i), 1 + yidx(j)) += 0.5;
      T(1 + yidx(j), 1 + yidx(i)) += 0.5;
    }
  }

  prog.objective.push_back(prog.C);

  auto push = [&](const MatrixXd& Q, char sense, double rhs, std::string label) {
    MomentConstraint c;
    c.coeff.push_back(Q);
    c.sense = sense;
    c.rhs = rhs;
    c.label = std::move(label);
    prog.constraints.push_back(std::move(c));
  };

  {
    MatrixXd unit = MatrixXd::Zero(N, N);
    unit(0, 0) = 1.0;
    push(unit, '=', 1.0, "unit_mass");
  }
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      push(prog.A[i * n + j], '>', 0.0,
           "obedience_" + std::to_string(i) + "_" + std::to_string(j));
      push(prog.B[i * n + j], '>', 0.0,
           "nash_" + std::to_string(i) + "_" + std::to_string(j));
    }
  for (int w = 0; w < s; ++w) push(prog.Sx[w], '=', 0.0, "mass_x" + std::to_string(w));
  push(prog.Sy, '=', 0.0, "mass_y");
  for (int w = 0; w < s; ++w)
    for (int i = 0; i < n; ++i)
      push(prog.Tx[w * n + i], '=', 0.0,
           "second_x" + std::to_string(w) + "_" + std::to_string(i));
  for (int i = 0; i < n; ++i) push(prog.Ty[i], '=', 0.0, "second_y" + std::to_string(i));

  // Cross localizations: each simplex identity multiplied by every other
  // coordinate. Valid for any measure on the product of simplices, and
  // needed for the rank-1 reduction argument to carry through.
  const int total = (s + 1) * n;
  for (int blockw = 0; blockw <= s; ++blockw) {
    const int off = blockw * n;
    const double mass = blockw < s ? a_mass : b_mass;
    for (int p = 0; p < total; ++p) {
      if (p >= off && p < off + n) continue;  // within-block rows exist above
      MatrixXd T = MatrixXd::Zero(N, N);
      T(0, 1 + p) = -0.5 * mass;
      T(1 + p, 0) = -0.5 * mass;
      for (int j = 0; j < n; ++j) {
        T(1 + p, 1 + off + j) += 0.5;
        T(1 + off + j, 1 + p) += 0.5;
      }
      push(T, '=', 0.0,
           "second_cross_" + std::to_string(blockw) + "_" + std::to_string(p));
    }
  }

  for (int p = 0; p < N; ++p)
    for (int q = p; q < N; ++q) {
      if (p == 0 && q == 0) continue;
      MatrixXd E = MatrixXd::Zero(N, N);
      add_cell(E, {p, q}, 1.0);
      push(E, '>', 0.0, "nonneg_" + std::to_string(p) + "_" + std::to_string(q));
    }

  return prog;
}

// ---------------------------------------------------------------------------
// per-state relaxation with fixed non-participant flow

MomentProgram build_gpm_fixed_y(const RoutingScenario& sc, const RouteFlow& y) {
  const int n = sc.num_routes();
  const int s = sc.num_states();
  const int D = sc.max_degree();
  const int h = moment_basis_degree(D);
  if (y.values.size() != n)
    throw std::runtime_error("build_gpm_fixed_y: y has wrong dimension");
  const double a_mass = sc.demand - y.mass;  // participant mass

  MomentProgram prog;
  prog.s = s;
  prog.n = n;
  prog.participant_mass = a_mass;
  prog.outsider_mass = y.mass;

  const std::vector<Monomial> basis = dedup_basis(n, h);
  CellMap cm;
  cm.build(basis);
  const int B = static_cast<int>(basis.size());

  for (int w = 0; w < s; ++w) prog.blocks.push_back({sc.states[w], basis});

  const Eigen::VectorXd ylinks = sc.link_flows(y.values);

  // per-state polynomial route latencies of the aggregate x + y, x variable
  auto latency_poly = [&](int w, int i) {
    Poly out = poly_const(n, 0.0);
    for (int e : sc.routes[i]) {
      Poly lin = poly_const(n, ylinks[e]);
      for (int r = 0; r < n; ++r)
        if (sc.incidence()(e, r) != 0.0) {
          Monomial m(n, 0);
          m[r] = 1;
          poly_add(lin, m, 1.0);
        }
      const auto& coeffs = sc.latency[w][e].coeffs;
      for (int d = 0; d <= sc.latency[w][e].degree(); ++d) {
        if (coeffs[d] == 0.0) continue;
        Poly term = poly_pow(lin, d, n);
        for (auto& [mono, c] : term) poly_add(out, mono, coeffs[d] * c);
      }
    }
    return out;
  };

  prog.objective.assign(s, MatrixXd::Zero(B, B));
  std::vector<std::vector<Poly>> RL(s);
  for (int w = 0; w < s; ++w) {
    RL[w].resize(n);
    Poly cost = poly_const(n, 0.0);
    for (int i = 0; i < n; ++i) {
      RL[w][i] = latency_poly(w, i);
      Poly xi = poly_const(n, y.values[i]);
      Monomial m(n, 0);
      m[i] = 1;
      poly_add(xi, m, 1.0);
      Poly term = poly_mul(xi, RL[w][i]);
      for (auto& [mono, c] : term) poly_add(cost, mono, c);
    }
    for (auto& [mono, c] : cost) {
      auto it = cm.cell.find(mono);
      if (it == cm.cell.end())
        throw std::runtime_error("moment basis too small for cost polynomial");
      add_cell(prog.objective[w], it->second, sc.prior[w] * c);
    }
  }

  auto zero_coeffs = [&]() {
    std::vector<MatrixXd> v(s, MatrixXd::Zero(B, B));
    return v;
  };

  // obedience and non-participant conditions, alternative minus recommended
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      MomentConstraint obed;
      obed.coeff = zero_coeffs();
      MomentConstraint nash;
      nash.coeff = zero_coeffs();
      for (int w = 0; w < s; ++w) {
        Poly gain = RL[w][j];
        for (auto& [mono, c] : RL[w][i]) poly_add(gain, mono, -c);
        Monomial mi(n, 0);
        mi[i] = 1;
        Poly ximono;
        poly_add(ximono, mi, 1.0);
        Poly og = poly_mul(ximono, gain);
        for (auto& [mono, c] : og)
          add_cell(obed.coeff[w], cm.cell.at(mono), sc.prior[w] * c);
        for (auto& [mono, c] : gain)
          add_cell(nash.coeff[w], cm.cell.at(mono), sc.prior[w] * y.values[i] * c);
      }
      obed.sense = '>';
      obed.rhs = 0.0;
      obed.label = "obedience_" + std::to_string(i) + "_" + std::to_string(j);
      nash.sense = '>';
      nash.rhs = 0.0;
      nash.label = "nash_" + std::to_string(i) + "_" + std::to_string(j);
      prog.constraints.push_back(std::move(obed));
      prog.constraints.push_back(std::move(nash));
    }

  // per-state support structure
  for (int w = 0; w < s; ++w) {
    auto per_block = [&](const MatrixXd& Q, char sense, double rhs, std::string label) {
      MomentConstraint c;
      c.coeff = zero_coeffs();
      c.coeff[w] = Q;
      c.sense = sense;
      c.rhs = rhs;
      c.label = std::move(label);
      prog.constraints.push_back(std::move(c));
    };

    {
      MatrixXd unit = MatrixXd::Zero(B, B);
      unit(0, 0) = 1.0;
      per_block(unit, '=', 1.0, "unit_" + std::to_string(w));
    }
    // aliased cells agree
    for (const auto& [mono, cells] : cm.all_cells) {
      for (size_t t = 1; t < cells.size(); ++t) {
        MatrixXd Q = MatrixXd::Zero(B, B);
        add_cell(Q, cells[0], 1.0);
        add_cell(Q, cells[t], -1.0);
        per_block(Q, '=', 0.0, "alias_" + std::to_string(w));
      }
    }
    // simplex localization at every representable degree
    for (const auto& [mono, cell0] : cm.cell) {
      if (degree_of(mono) > 2 * h - 1) continue;
      MatrixXd Q = MatrixXd::Zero(B, B);
      add_cell(Q, cell0, a_mass);
      for (int i = 0; i < n; ++i) {
        Monomial up = mono;
        up[i] += 1;
        add_cell(Q, cm.cell.at(up), -1.0);
      }
      per_block(Q, '=', 0.0, "simplex_" + std::to_string(w));
    }
    // entrywise nonnegative moments
    for (const auto& [mono, cell0] : cm.cell) {
      if (degree_of(mono) == 0) continue;
      MatrixXd Q = MatrixXd::Zero(B, B);
      add_cell(Q, cell0, 1.0);
      per_block(Q, '>', 0.0, "nonneg_" + std::to_string(w));
    }
  }

  return prog;
}

// ---------------------------------------------------------------------------
// lowering to the block SDP

SdpProgram MomentProgram::to_sdp() const {
  SdpProgram sdp;
  for (const auto& b : blocks) sdp.blocks.push_back({b.size(), false});

  // Vacuous rows (all-zero coefficients with zero right-hand side) would pin
  // their slack at zero and destroy the interior; skip them.
  auto vacuous = [&](const MomentConstraint& c) {
    if (c.rhs != 0.0) return false;
    for (const auto& Q : c.coeff)
      if (Q.cwiseAbs().maxCoeff() != 0.0) return false;
    return true;
  };

  std::vector<const MomentConstraint*> live;
  int slack_count = 0;
  for (const auto& c : constraints) {
    if (vacuous(c)) continue;
    live.push_back(&c);
    if (c.sense == '>') ++slack_count;
  }
  const int slack_block = static_cast<int>(sdp.blocks.size());
  if (slack_count > 0) sdp.blocks.push_back({slack_count, true});

  sdp.C = sdp.zero_blocks();
  for (size_t b = 0; b < blocks.size(); ++b) sdp.C[b] = objective[b];

  int slack_at = 0;
  sdp.rhs.resize(live.size());
  for (size_t i = 0; i < live.size(); ++i) {
    const auto& c = *live[i];
    SdpBlockMat A = sdp.zero_blocks();
    for (size_t b = 0; b < blocks.size(); ++b) A[b] = c.coeff[b];
    if (c.sense == '>') {
      A[slack_block](slack_at, 0) = -1.0;
      ++slack_at;
    } else if (c.sense != '=') {
      throw std::runtime_error("unknown constraint sense");
    }
    sdp.A.push_back(std::move(A));
    sdp.rhs[i] = c.rhs;
  }
  return sdp;
}

namespace {

// The relaxation layer accepts a relative gap of 1e-7; a solve that fell
// just short of the engine's own target can still meet this contract.
SdpStatus moment_layer_status(const SdpSolution& sol) {
  if (sol.status == SdpStatus::Optimal) return sol.status;
  if (sol.status == SdpStatus::Failed && sol.relative_gap <= 1e-7 &&
      sol.primal_infeasibility <= 1e-7 && sol.dual_infeasibility <= 1e-7)
    return SdpStatus::Optimal;
  return sol.status;
}

// Coordinates of a zero-mass simplex block carry identically-zero moments,
// which leaves the feasible set without interior. Solving on the surviving
// coordinates and re-embedding zeros is lossless.
struct Reduction {
  std::vector<std::vector<int>> keep;  // per block: surviving basis indices
  bool active = false;
};

Reduction plan_reduction(const MomentProgram& prog) {
  Reduction red;
  for (size_t b = 0; b < prog.blocks.size(); ++b) {
    const auto& basis = prog.blocks[b].basis;
    std::vector<int> keep;
    for (size_t p = 0; p < basis.size(); ++p) {
      bool drop = false;
      if (prog.diagonal_form && p > 0) {
        const int coord = static_cast<int>(p) - 1;
        const bool is_y = coord >= prog.s * prog.n;
        const double mass = is_y ? prog.outsider_mass : prog.participant_mass;
        drop = (mass <= 0.0);
      } else if (!prog.diagonal_form) {
        // per-state basis: all non-constant monomials vanish at zero mass
        drop = (prog.participant_mass <= 0.0) &&
               degree_of(prog.blocks[b].basis[p]) > 0;
      }
      if (!drop) keep.push_back(static_cast<int>(p));
    }
    if (static_cast<int>(keep.size()) != prog.blocks[b].size()) red.active = true;
    red.keep.push_back(std::move(keep));
  }
  return red;
}

MatrixXd take_principal(const MatrixXd& Q, const std::vector<int>& keep) {
  MatrixXd out(keep.size(), keep.size());
  for (size_t p = 0; p < keep.size(); ++p)
    for (size_t q = 0; q < keep.size(); ++q) out(p, q) = Q(keep[p], keep[q]);
  return out;
}

}  // namespace

MomentSolveResult solve_moment_sdp(const MomentProgram& prog, const SdpOptions& opts) {
  const Reduction red = plan_reduction(prog);

  const MomentProgram* solve_prog = &prog;
  MomentProgram reduced;
  if (red.active) {
    for (size_t b = 0; b < prog.blocks.size(); ++b) {
      MomentBlock blk;
      blk.name = prog.blocks[b].name;
      for (int p : red.keep[b]) blk.basis.push_back(prog.blocks[b].basis[p]);
      reduced.blocks.push_back(std::move(blk));
      reduced.objective.push_back(take_principal(prog.objective[b], red.keep[b]));
    }
    for (const auto& c : prog.constraints) {
      MomentConstraint rc;
      rc.sense = c.sense;
      rc.rhs = c.rhs;
      rc.label = c.label;
      double maxcoef = 0.0;
      for (size_t b = 0; b < prog.blocks.size(); ++b) {
        rc.coeff.push_back(take_principal(c.coeff[b], red.keep[b]));
        maxcoef = std::max(maxcoef, rc.coeff.back().cwiseAbs().maxCoeff());
      }
      if (maxcoef == 0.0 && rc.rhs == 0.0) continue;  // vacuous after reduction
      reduced.constraints.push_back(std::move(rc));
    }
    solve_prog = &reduced;
  }

  SdpProgram sdp = solve_prog->to_sdp();
  SdpSolution sol = solve_sdp(sdp, opts);

  MomentSolveResult out;
  out.status = moment_layer_status(sol);
  out.relativeGap = sol.relative_gap;
  out.message = out.status == SdpStatus::Optimal ? "" : sol.message;
  out.value = sol.primal_objective;
  for (size_t b = 0; b < prog.blocks.size(); ++b) {
    MatrixXd Mb = MatrixXd::Zero(prog.blocks[b].size(), prog.blocks[b].size());
    MatrixXd Mr = 0.5 * (sol.X[b] + sol.X[b].transpose());
    const auto& keep = red.keep[b];
    for (size_t p = 0; p < keep.size(); ++p)
      for (size_t q = 0; q < keep.size(); ++q) Mb(keep[p], keep[q]) = Mr(p, q);
    out.block_moments.push_back(std::move(Mb));
  }
  if (!out.block_moments.empty()) out.M = out.block_moments[0];
  if (prog.diagonal_form && sol.status == SdpStatus::Optimal)
    out.tms = check_rank1(out.M, prog.s, prog.n, prog.participant_mass,
                          prog.outsider_mass);
  return out;
}

// ---------------------------------------------------------------------------
// rank-1 admissibility

TmsCheck check_rank1(const Eigen::MatrixXd& M, int s, int n, double participant_mass,
                     double outsider_mass) {
  const int N = (s + 1) * n + 1;
  if (M.rows() != N || M.cols() != N)
    throw std::runtime_error("check_rank1: matrix has wrong dimension");

  TmsCheck out;
  out.M = M;
  const double scale = 1.0 + M.cwiseAbs().maxCoeff();
  out.massTolerance = 1e-8 * scale;

  double violation = 0.0;
  violation = std::max(violation, std::abs(M(0, 0) - 1.0));
  violation = std::max(violation, (M - M.transpose()).cwiseAbs().maxCoeff());
  violation = std::max(violation, -M.minCoeff());

  Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (M + M.transpose()));
  violation = std::max(violation, -es.eigenvalues().minCoeff());

  auto block_mass = [&](int off, int size, double mass) {
    double sum = 0.0;
    for (int i = 0; i < size; ++i) sum += M(0, 1 + off + i);
    violation = std::max(violation, std::abs(sum - mass));
    for (int i = 0; i < size; ++i) {
      double row = 0.0;
      for (int j = 0; j < size; ++j) row += M(1 + off + i, 1 + off + j);
      violation = std::max(violation, std::abs(row - mass * M(0, 1 + off + i)));
    }
  };
  for (int w = 0; w < s; ++w) block_mass(w * n, n, participant_mass);
  block_mass(s * n, n, outsider_mass);

  out.worstViolation = violation;
  out.extractedPoint = M.row(0).segment(1, N - 1).transpose();

  const VectorXd ev = es.eigenvalues();
  const double l1 = ev[N - 1];
  const double l2 = N >= 2 ? std::abs(ev[N - 2]) : 0.0;
  out.eigenRatio = l1 > 0.0 ? l2 / l1 : 1.0;

  if (violation > out.massTolerance) {
    out.verdict = TmsCheck::Verdict::ConstraintViolated;
  } else if (out.eigenRatio > out.eigenRatioThreshold) {
    out.verdict = TmsCheck::Verdict::NotRank1;
  } else {
    out.verdict = TmsCheck::Verdict::Rank1Admissible;
  }
  return out;
}

// ---------------------------------------------------------------------------
// two-route interval-moment program

UnivariateResult two_link_univariate_sdp(const RoutingScenario& sc, const RouteFlow& y,
                                         const SdpOptions& opts) {
  if (sc.num_routes() != 2)
    throw std::runtime_error("two_link_univariate_sdp requires exactly two routes");
  const int s = sc.num_states();
  const int D = sc.max_degree();
  const int K = D + 1;
  const double support = sc.demand - y.mass;  // participant mass, support [0, a]
  const Eigen::VectorXd ylinks = sc.link_flows(y.values);

  if (support <= 0.0) {
    // no participants: the only measure is the point mass at zero flow
    UnivariateResult out;
    out.status = SdpStatus::Optimal;
    out.value = 0.0;
    for (int w = 0; w < s; ++w) {
      double c = 0.0;
      for (int e = 0; e < sc.num_links(); ++e)
        c += ylinks[e] * sc.latency[w][e].eval(ylinks[e]);
      out.value += sc.prior[w] * c;
      Eigen::VectorXd m = Eigen::VectorXd::Zero(K + 1);
      m[0] = 1.0;
      out.moments.push_back(m);
    }
    return out;
  }
  // moments are taken in the normalized variable t / support on [0, 1],
  // which keeps the Hankel blocks well conditioned for higher degrees
  const double a = 1.0;

  // univariate polynomial helpers, coefficient vectors indexed by power
  auto u_mul = [](const VectorXd& p, const VectorXd& q) {
    VectorXd out = VectorXd::Zero(p.size() + q.size() - 1);
    for (int i = 0; i < p.size(); ++i)
      for (int j = 0; j < q.size(); ++j) out[i + j] += p[i] * q[j];
    return out;
  };
  auto u_pow = [&](const VectorXd& p, int d) {
    VectorXd out = VectorXd::Ones(1);
    for (int i = 0; i < d; ++i) out = u_mul(out, p);
    return out;
  };
  auto u_pad = [&](const VectorXd& p, int len) {
    VectorXd out = VectorXd::Zero(len);
    out.head(p.size()) = p;
    return out;
  };

  // route-aggregate link flows as polynomials of the normalized variable:
  // route flows are (support * tau + y_1, support * (1 - tau) + y_2)
  auto link_poly = [&](int e) {
    VectorXd p = VectorXd::Zero(2);
    p[0] = ylinks[e] + sc.incidence()(e, 1) * support;
    p[1] = (sc.incidence()(e, 0) - sc.incidence()(e, 1)) * support;
    return p;
  };

  std::vector<VectorXd> cost_poly(s), gain12(s), gain21(s);
  for (int w = 0; w < s; ++w) {
    VectorXd cost = VectorXd::Zero(K + 2);
    VectorXd rl[2] = {VectorXd::Zero(K + 1), VectorXd::Zero(K + 1)};
    for (int e = 0; e < sc.num_links(); ++e) {
      VectorXd lp = link_poly(e);
      VectorXd ell = VectorXd::Zero(K + 1);
      for (int d = 0; d <= sc.latency[w][e].degree(); ++d) {
        const double c = sc.latency[w][e].coeffs[d];
        if (c == 0.0) continue;
        ell += c * u_pad(u_pow(lp, d), K + 1);
      }
      cost += u_pad(u_mul(lp, ell), K + 2);
      for (int i = 0; i < 2; ++i)
        if (sc.incidence()(e, i) != 0.0) rl[i] += ell;
    }
    cost_poly[w] = cost.head(K + 1);  // degree D+1
    gain12[w] = rl[1] - rl[0];        // alternative 2 minus route 1
    gain21[w] = rl[0] - rl[1];
  }

  // expected-value inequality rows, skipping identically-zero ones
  struct IneqRow {
    std::vector<VectorXd> poly;  // per state, coefficients over powers of t
  };
  std::vector<IneqRow> ineq_rows;
  {
    auto t_poly = [&]() {
      VectorXd t = VectorXd::Zero(2);
      t[1] = support;
      return t;
    };
    auto aminus_poly = [&]() {
      VectorXd t(2);
      t[0] = support;
      t[1] = -support;
      return t;
    };
    auto add_ineq = [&](const std::vector<VectorXd>& gain, int kind, double fixed) {
      IneqRow row;
      double maxc = 0.0;
      for (int w = 0; w < s; ++w) {
        VectorXd poly;
        if (kind == 0)
          poly = u_mul(t_poly(), gain[w]);
        else if (kind == 1)
          poly = u_mul(aminus_poly(), gain[w]);
        else
          poly = gain[w] * fixed;
        row.poly.push_back(poly);
        maxc = std::max(maxc, poly.cwiseAbs().maxCoeff());
      }
      if (maxc != 0.0) ineq_rows.push_back(std::move(row));
    };
    add_ineq(gain12, 0, 1.0);          // x_1 (rl_2 - rl_1) >= 0
    add_ineq(gain21, 1, 1.0);          // x_2 (rl_1 - rl_2) >= 0
    add_ineq(gain12, 2, y.values[0]);  // y conditions
    add_ineq(gain21, 2, y.values[1]);
  }

  // blocks per state: H1 PSD, H2 PSD, moment diagonal; shared slack diagonal
  const bool odd = (K % 2 == 1);
  const int r = odd ? (K - 1) / 2 : K / 2;
  const int h1 = r + 1;
  const int h2 = odd ? r + 1 : r;

  SdpProgram sdp;
  std::vector<int> H1_at(s), H2_at(s), mom_at(s);
  for (int w = 0; w < s; ++w) {
    H1_at[w] = static_cast<int>(sdp.blocks.size());
    sdp.blocks.push_back({h1, false});
    H2_at[w] = static_cast<int>(sdp.blocks.size());
    sdp.blocks.push_back({h2, false});
    mom_at[w] = static_cast<int>(sdp.blocks.size());
    sdp.blocks.push_back({K + 1, true});
  }
  const int slack_at = static_cast<int>(sdp.blocks.size());
  const int n_ineq = static_cast<int>(ineq_rows.size());
  if (n_ineq > 0) sdp.blocks.push_back({n_ineq, true});

  sdp.C = sdp.zero_blocks();
  for (int w = 0; w < s; ++w)
    for (int d = 0; d <= K; ++d) sdp.C[mom_at[w]](d, 0) = sc.prior[w] * cost_poly[w][d];

  std::vector<SdpBlockMat> rows;
  std::vector<double> rhs;

  auto new_row = [&]() -> SdpBlockMat& {
    rows.push_back(sdp.zero_blocks());
    rhs.push_back(0.0);
    return rows.back();
  };

  for (int w = 0; w < s; ++w) {
    {
      auto& row = new_row();
      row[mom_at[w]](0, 0) = 1.0;
      rhs.back() = 1.0;
    }
    // Hankel structure: H1 and H2 cells tied to the moment variables
    for (int i = 0; i < h1; ++i)
      for (int j = i; j < h1; ++j) {
        auto& row = new_row();
        add_cell(row[H1_at[w]], {i, j}, 1.0);
        if (odd)
          row[mom_at[w]](i + j + 1, 0) -= 1.0;
        else
          row[mom_at[w]](i + j, 0) -= 1.0;
      }
    for (int i = 0; i < h2; ++i)
      for (int j = i; j < h2; ++j) {
        auto& row = new_row();
        add_cell(row[H2_at[w]], {i, j}, 1.0);
        if (odd) {
          row[mom_at[w]](i + j, 0) -= a;
          row[mom_at[w]](i + j + 1, 0) += 1.0;
        } else {
          row[mom_at[w]](i + j + 1, 0) -= a;
          row[mom_at[w]](i + j + 2, 0) += 1.0;
        }
      }
  }

  for (int slot = 0; slot < n_ineq; ++slot) {
    auto& row = new_row();
    for (int w = 0; w < s; ++w) {
      const VectorXd& poly = ineq_rows[slot].poly[w];
      for (int d = 0; d < poly.size() && d <= K; ++d)
        row[mom_at[w]](d, 0) += sc.prior[w] * poly[d];
    }
    row[slack_at](slot, 0) = -1.0;
  }

  sdp.A = rows;
  sdp.rhs = Eigen::Map<VectorXd>(rhs.data(), rhs.size());

  SdpSolution sol = solve_sdp(sdp, opts);
  UnivariateResult out;
  out.status = moment_layer_status(sol);
  out.message = out.status == SdpStatus::Optimal ? "" : sol.message;
  out.value = sol.primal_objective;
  for (int w = 0; w < s; ++w) {
    Eigen::VectorXd m = sol.X[mom_at[w]].col(0);
    double scale = 1.0;
    for (int d = 0; d <= K; ++d) {
      m[d] *= scale;  // back to moments of the unnormalized flow
      scale *= support;
    }
    out.moments.push_back(m);
  }
  return out;
}

// ---------------------------------------------------------------------------
// SDPA surface

namespace {

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

SdpaFile sdpa_encode(const MomentProgram& prog) {
  SdpaFile file;
  file.comments.push_back("\"moment relaxation export");

  // variable order: blocks, then upper-triangular cells
  struct Var {
    int b, p, q;
  };
  std::vector<Var> vars;
  for (size_t b = 0; b < prog.blocks.size(); ++b) {
    const int B = prog.blocks[b].size();
    for (int p = 0; p < B; ++p)
      for (int q = p; q < B; ++q) vars.push_back({static_cast<int>(b), p, q});
  }
  const int m = static_cast<int>(vars.size());

  int diag_rows = 0;
  for (const auto& c : prog.constraints) diag_rows += (c.sense == '=') ? 2 : 1;

  for (const auto& blk : prog.blocks) file.block_sizes.push_back(blk.size());
  file.block_sizes.push_back(-diag_rows);
  const int diag_blk = static_cast<int>(prog.blocks.size()) + 1;  // 1-based

  file.c.resize(m);
  for (int k = 0; k < m; ++k) {
    const auto& v = vars[k];
    const double coeff = prog.objective[v.b](v.p, v.q);
    file.c[k] = (v.p == v.q) ? coeff : 2.0 * coeff;
  }

  // F_k PSD-block entries: the LMI reproduces the moment matrices
  for (int k = 0; k < m; ++k) {
    const auto& v = vars[k];
    file.entries.push_back({k + 1, v.b + 1, v.p + 1, v.q + 1, 1.0});
  }

  // scalar rows: one diagonal entry per inequality, two per split equality
  int row = 0;
  for (const auto& c : prog.constraints) {
    const int copies = (c.sense == '=') ? 2 : 1;
    for (int copy = 0; copy < copies; ++copy) {
      const double sign = (copy == 0) ? 1.0 : -1.0;
      for (int k = 0; k < m; ++k) {
        const auto& v = vars[k];
        const double coeff = c.coeff[v.b](v.p, v.q);
        if (coeff == 0.0) continue;
        const double scaled = (v.p == v.q) ? coeff : 2.0 * coeff;
        file.entries.push_back({k + 1, diag_blk, row + 1, row + 1, sign * scaled});
      }
      if (c.rhs != 0.0)
        file.entries.push_back({0, diag_blk, row + 1, row + 1, sign * c.rhs});
      ++row;
    }
  }

  std::sort(file.entries.begin(), file.entries.end(),
            [](const SdpaEntry& a, const SdpaEntry& b) {
              return std::tie(a.matno, a.blkno, a.i, a.j) <
                     std::tie(b.matno, b.blkno, b.i, b.j);
            });
  return file;
}

void write_sdpa(const SdpaFile& file, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  for (const auto& c : file.comments) out << c << "\n";
  out << file.c.size() << "\n";
  out << file.block_sizes.size() << "\n";
  for (size_t i = 0; i < file.block_sizes.size(); ++i)
    out << (i ? " " : "") << file.block_sizes[i];
  out << "\n";
  for (int i = 0; i < file.c.size(); ++i)
    out << (i ? " " : "") << fmt_double(file.c[i]);
  out << "\n";
  for (const auto& e : file.entries)
    out << e.matno << " " << e.blkno << " " << e.i << " " << e.j << " "
        << fmt_double(e.value) << "\n";
  if (!out) throw std::runtime_error("write failure on '" + path + "'");
}

SdpaFile read_sdpa(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  SdpaFile file;
  std::string line;
  long m = -1, nblocks = -1;

  auto clean = [](std::string t) {
    for (char& c : t)
      if (c == ',' || c == '{' || c == '}' || c == '(' || c == ')') c = ' ';
    return t;
  };

  while (std::getline(in, line)) {
    if (!line.empty() && (line[0] == '"' || line[0] == '*')) {
      file.comments.push_back(line);
      continue;
    }
    if (m < 0) {
      m = std::stol(clean(line));
      continue;
    }
    if (nblocks < 0) {
      nblocks = std::stol(clean(line));
      continue;
    }
    if (file.block_sizes.empty() && nblocks > 0) {
      std::istringstream ss(clean(line));
      int v;
      while (ss >> v) file.block_sizes.push_back(v);
      continue;
    }
    if (file.c.size() == 0 && m >= 0) {
      std::istringstream ss(clean(line));
      std::vector<double> c;
      double v;
      while (ss >> v) c.push_back(v);
      file.c = Eigen::Map<VectorXd>(c.data(), c.size());
      continue;
    }
    std::istringstream ss(clean(line));
    SdpaEntry e;
    if (ss >> e.matno >> e.blkno >> e.i >> e.j >> e.value) file.entries.push_back(e);
  }
  if (m != file.c.size())
    throw std::runtime_error("SDPA file: variable count mismatch");
  if (nblocks != static_cast<long>(file.block_sizes.size()))
    throw std::runtime_error("SDPA file: block count mismatch");
  return file;
}

void export_sdpa(const MomentProgram& prog, const std::string& path) {
  write_sdpa(sdpa_encode(prog), path);
}

double solve_sdpa_file(const SdpaFile& file, const SdpOptions& opts) {
  // conic companion of the file's LMI program:
  //   max <F_0, Y>  s.t.  <F_k, Y> = c_k,  Y >= 0
  const int m = static_cast<int>(file.c.size());
  SdpProgram prog;
  for (int b : file.block_sizes)
    prog.blocks.push_back(b > 0 ? SdpBlockSpec{b, false} : SdpBlockSpec{-b, true});

  SdpBlockMat F0 = prog.zero_blocks();
  std::vector<SdpBlockMat> Fk(m);
  for (int k = 0; k < m; ++k) Fk[k] = prog.zero_blocks();

  for (const auto& e : file.entries) {
    const int b = e.blkno - 1;
    SdpBlockMat& target = (e.matno == 0) ? F0 : Fk[e.matno - 1];
    if (prog.blocks[b].diagonal) {
      if (e.i != e.j) throw std::runtime_error("off-diagonal entry in diagonal block");
      target[b](e.i - 1, 0) += e.value;
    } else {
      // upper-triangle entries are mirrored, not halved
      target[b](e.i - 1, e.j - 1) += e.value;
      if (e.i != e.j) target[b](e.j - 1, e.i - 1) += e.value;
    }
  }

  prog.C = F0;
  for (auto& blk : prog.C) blk = -blk;  // maximize <F0, Y>
  prog.A = Fk;
  prog.rhs = file.c;

  SdpSolution sol = solve_sdp(prog, opts);
  if (sol.status != SdpStatus::Optimal)
    throw std::runtime_error("companion solve failed: " + sol.message);
  return -sol.primal_objective;
}

}  // namespace routesig
