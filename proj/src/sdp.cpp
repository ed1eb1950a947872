#include "routesig/sdp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <stdexcept>

namespace routesig {

namespace {

// The path-following iterations run in extended precision: the Schur
// system conditioning grows like 1/mu^2, and the extra mantissa bits move
// the attainable accuracy floor well below the solver tolerances.
using Scalar = long double;
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
using BlockMat = std::vector<Mat>;

Mat sym(const Mat& m) { return 0.5L * (m + m.transpose()); }

// Largest alpha in (0, 1] with X + alpha * dX staying positive definite,
// shrunk by a fraction of the boundary distance. Eigenvalue-based with a
// spectrum floor so nearly singular iterates still move.
Scalar max_step(const SdpBlockSpec& spec, const Mat& X, const Mat& dX, Scalar frac) {
  if (spec.diagonal) {
    Scalar alpha = 1.0L;
    for (int i = 0; i < spec.size; ++i)
      if (dX(i, 0) < 0.0L)
        alpha = std::min(alpha, -frac * std::max(X(i, 0), Scalar(0)) / dX(i, 0));
    return alpha;
  }
  Eigen::SelfAdjointEigenSolver<Mat> ex(sym(X));
  const Scalar lmax = ex.eigenvalues().maxCoeff();
  const Scalar floor = std::max(lmax, Scalar(1)) * Scalar(1e-18);
  Vec lx = ex.eigenvalues().cwiseMax(floor);
  Mat Linv = lx.cwiseSqrt().cwiseInverse().asDiagonal() * ex.eigenvectors().transpose();
  Eigen::SelfAdjointEigenSolver<Mat> es(sym(Linv * dX * Linv.transpose()));
  Scalar lmin = es.eigenvalues().minCoeff();
  if (lmin >= 0.0L) return 1.0L;
  return std::min(Scalar(1), -frac / lmin);
}

struct Scaling {
  Mat W;      // NT scaling point (dense blocks)
  Vec wdiag;  // diagonal blocks
};

Scaling nt_scaling(const SdpBlockSpec& spec, const Mat& X, const Mat& S) {
  Scaling sc;
  if (spec.diagonal) {
    sc.wdiag = (X.col(0).array() / S.col(0).array()).sqrt();
    return sc;
  }
  Eigen::SelfAdjointEigenSolver<Mat> es_s(sym(S));
  Vec ls = es_s.eigenvalues().cwiseMax(Scalar(1e-300));
  Mat S_half =
      es_s.eigenvectors() * ls.cwiseSqrt().asDiagonal() * es_s.eigenvectors().transpose();
  Mat S_half_inv = es_s.eigenvectors() * ls.cwiseSqrt().cwiseInverse().asDiagonal() *
                   es_s.eigenvectors().transpose();
  Mat M = sym(S_half * X * S_half);
  Eigen::SelfAdjointEigenSolver<Mat> es_m(M);
  Vec lm = es_m.eigenvalues().cwiseMax(Scalar(1e-300));
  Mat M_half =
      es_m.eigenvectors() * lm.cwiseSqrt().asDiagonal() * es_m.eigenvectors().transpose();
  sc.W = sym(S_half_inv * M_half * S_half_inv);
  return sc;
}

Mat to_scalar(const Eigen::MatrixXd& m) { return m.cast<Scalar>(); }
Eigen::MatrixXd to_double(const Mat& m) { return m.cast<double>(); }

}  // namespace

SdpBlockMat SdpProgram::zero_blocks() const {
  SdpBlockMat out;
  for (const auto& b : blocks)
    out.push_back(b.diagonal ? Eigen::MatrixXd::Zero(b.size, 1)
                             : Eigen::MatrixXd::Zero(b.size, b.size));
  return out;
}

int SdpProgram::total_dim() const {
  int n = 0;
  for (const auto& b : blocks) n += b.size;
  return n;
}

SdpSolution solve_sdp(const SdpProgram& prog, const SdpOptions& opts) {
  const int m = static_cast<int>(prog.A.size());
  const int nb = static_cast<int>(prog.blocks.size());
  const int N = prog.total_dim();
  if (prog.rhs.size() != m) throw std::runtime_error("solve_sdp: rhs size mismatch");

  BlockMat C;
  std::vector<BlockMat> A(m);
  for (int b = 0; b < nb; ++b) C.push_back(to_scalar(prog.C[b]));
  for (int i = 0; i < m; ++i)
    for (int b = 0; b < nb; ++b) A[i].push_back(to_scalar(prog.A[i][b]));
  Vec rhs = prog.rhs.cast<Scalar>();

  SdpSolution sol;
  Vec y = Vec::Zero(m);

  Scalar cnorm = 1.0L, bnorm = 1.0L + rhs.cwiseAbs().maxCoeff();
  for (int b = 0; b < nb; ++b) cnorm = std::max(cnorm, Scalar(C[b].cwiseAbs().maxCoeff()));
  Scalar tau_p = 10.0L * bnorm, tau_d = 10.0L * cnorm;

  auto zero_blocks = [&]() {
    BlockMat out;
    for (const auto& b : prog.blocks)
      out.push_back(b.diagonal ? Mat::Zero(b.size, 1) : Mat::Zero(b.size, b.size));
    return out;
  };

  BlockMat X = zero_blocks(), S = zero_blocks();
  for (int b = 0; b < nb; ++b) {
    if (prog.blocks[b].diagonal) {
      X[b].setConstant(tau_p);
      S[b].setConstant(tau_d);
    } else {
      X[b] = tau_p * Mat::Identity(prog.blocks[b].size, prog.blocks[b].size);
      S[b] = tau_d * Mat::Identity(prog.blocks[b].size, prog.blocks[b].size);
    }
  }

  auto block_dot = [](const Mat& a, const Mat& b) -> Scalar {
    return (a.array() * b.array()).sum();
  };
  auto apply_A = [&](const BlockMat& Xv) {
    Vec out(m);
    for (int i = 0; i < m; ++i) {
      Scalar v = 0.0L;
      for (int b = 0; b < nb; ++b) v += block_dot(A[i][b], Xv[b]);
      out[i] = v;
    }
    return out;
  };
  auto apply_At = [&](const Vec& yv) {
    BlockMat out = zero_blocks();
    for (int i = 0; i < m; ++i)
      for (int b = 0; b < nb; ++b) out[b] += yv[i] * A[i][b];
    return out;
  };
  auto dot_all = [&](const BlockMat& P, const BlockMat& Q) {
    Scalar v = 0.0L;
    for (int b = 0; b < nb; ++b) v += block_dot(P[b], Q[b]);
    return v;
  };

  auto store = [&](const BlockMat& Xv, const BlockMat& Sv, const Vec& yv) {
    sol.X.clear();
    sol.S.clear();
    for (int b = 0; b < nb; ++b) {
      sol.X.push_back(to_double(Xv[b]));
      sol.S.push_back(to_double(Sv[b]));
    }
    sol.y = yv.cast<double>();
  };

  Scalar best_score = std::numeric_limits<Scalar>::infinity();
  BlockMat bestX = X, bestS = S;
  Vec best_y = y;
  Scalar best_metrics[5] = {0, 0, 0, 0, 0};
  int stall = 0;
  Scalar prev_min_step = 1.0L;
  Scalar mu0 = -1.0L, pres0 = -1.0L;

  auto finish_best = [&](SdpStatus fallback, const char* note) -> SdpSolution& {
    store(bestX, bestS, best_y);
    sol.primal_objective = static_cast<double>(best_metrics[0]);
    sol.dual_objective = static_cast<double>(best_metrics[1]);
    sol.relative_gap = static_cast<double>(best_metrics[2]);
    sol.primal_infeasibility = static_cast<double>(best_metrics[3]);
    sol.dual_infeasibility = static_cast<double>(best_metrics[4]);
    const bool ok = best_metrics[2] <= opts.gap_tol && best_metrics[3] <= opts.feas_tol &&
                    best_metrics[4] <= opts.feas_tol;
    sol.status = ok ? SdpStatus::Optimal : fallback;
    if (!ok) sol.message = note;
    return sol;
  };

  for (int iter = 0; iter < opts.max_iterations; ++iter) {
    Vec rp = rhs - apply_A(X);
    BlockMat Aty = apply_At(y);
    BlockMat Rd = zero_blocks();
    Scalar dres = 0.0L;
    for (int b = 0; b < nb; ++b) {
      Rd[b] = C[b] - S[b] - Aty[b];
      dres = std::max(dres, Scalar(Rd[b].cwiseAbs().maxCoeff()));
    }

    Scalar mu = dot_all(X, S) / N;
    Scalar pobj = dot_all(C, X);
    Scalar dobj = rhs.dot(y);
    Scalar gap = std::abs(pobj - dobj) / (1.0L + std::abs(pobj) + std::abs(dobj));
    Scalar pres = rp.cwiseAbs().maxCoeff() / bnorm;
    Scalar dres_rel = dres / cnorm;
    if (mu0 < 0.0L) {
      mu0 = mu;
      pres0 = std::max(pres, Scalar(1e-16));
    }

    sol.iterations = iter;
    const Scalar score = std::max({gap, pres, dres_rel});
    if (score < 0.99L * best_score) {
      best_score = score;
      bestX = X;
      bestS = S;
      best_y = y;
      best_metrics[0] = pobj;
      best_metrics[1] = dobj;
      best_metrics[2] = gap;
      best_metrics[3] = pres;
      best_metrics[4] = dres_rel;
      stall = 0;
    } else {
      ++stall;
    }

    if (gap <= opts.gap_tol && pres <= opts.feas_tol && dres_rel <= opts.feas_tol) {
      store(X, S, y);
      sol.primal_objective = static_cast<double>(pobj);
      sol.dual_objective = static_cast<double>(dobj);
      sol.relative_gap = static_cast<double>(gap);
      sol.primal_infeasibility = static_cast<double>(pres);
      sol.dual_infeasibility = static_cast<double>(dres_rel);
      sol.status = SdpStatus::Optimal;
      return sol;
    }
    if (stall > 25) return finish_best(SdpStatus::Failed, "progress stalled");
    if (dobj > 1e9L * bnorm && dres_rel <= 1e-6L) {
      store(X, S, y);
      sol.status = SdpStatus::Infeasible;
      sol.message = "dual objective diverging; primal judged infeasible";
      return sol;
    }
    if (mu < 1e-16L && (pres > 1e-6L || dres_rel > 1e-6L))
      return finish_best(SdpStatus::Infeasible,
                         "complementarity vanished with large residuals");

    std::vector<Scaling> W(nb);
    for (int b = 0; b < nb; ++b) W[b] = nt_scaling(prog.blocks[b], X[b], S[b]);

    auto scale_round = [&](int b, const Mat& M) -> Mat {
      if (prog.blocks[b].diagonal)
        return (W[b].wdiag.array().square() * M.col(0).array()).matrix();
      return sym(W[b].W * sym(M) * W[b].W);
    };

    Mat H(m, m);
    std::vector<BlockMat> WAW(m);
    for (int j = 0; j < m; ++j) {
      WAW[j] = zero_blocks();
      for (int b = 0; b < nb; ++b) WAW[j][b] = scale_round(b, A[j][b]);
    }
    for (int i = 0; i < m; ++i)
      for (int j = i; j < m; ++j) {
        Scalar v = 0.0L;
        for (int b = 0; b < nb; ++b) v += block_dot(A[i][b], WAW[j][b]);
        H(i, j) = H(j, i) = v;
      }

    Eigen::LDLT<Mat> ldlt;
    {
      Mat Hreg = H;
      Scalar jitter = 1e-16L * (1.0L + H.diagonal().cwiseAbs().maxCoeff());
      for (int attempt = 0; attempt < 8; ++attempt) {
        ldlt.compute(Hreg);
        if (ldlt.info() == Eigen::Success && ldlt.isPositive()) break;
        Hreg = H + jitter * Mat::Identity(m, m);
        jitter *= 100.0L;
      }
    }

    auto solve_newton = [&](Scalar sigma, Vec& dy, BlockMat& dX, BlockMat& dS,
                            const BlockMat* corrX, const BlockMat* corrS) -> bool {
      BlockMat Rc = zero_blocks();
      for (int b = 0; b < nb; ++b) {
        if (prog.blocks[b].diagonal) {
          Rc[b] = (sigma * mu / S[b].col(0).array() - X[b].col(0).array()).matrix();
          if (corrX)
            Rc[b] -= ((*corrX)[b].col(0).array() * (*corrS)[b].col(0).array() /
                      S[b].col(0).array())
                         .matrix();
        } else {
          Eigen::SelfAdjointEigenSolver<Mat> es(sym(S[b]));
          Vec ls = es.eigenvalues().cwiseMax(Scalar(1e-300));
          Mat Sinv = es.eigenvectors() * ls.cwiseInverse().asDiagonal() *
                     es.eigenvectors().transpose();
          Rc[b] = sigma * mu * sym(Sinv) - X[b];
          if (corrX) Rc[b] -= sym((*corrX)[b] * (*corrS)[b] * sym(Sinv));
        }
      }
      Vec rhs_y = rp - apply_A(Rc);
      BlockMat WRdW = zero_blocks();
      for (int b = 0; b < nb; ++b) WRdW[b] = scale_round(b, Rd[b]);
      for (int i = 0; i < m; ++i) {
        Scalar v = 0.0L;
        for (int b = 0; b < nb; ++b) v += block_dot(A[i][b], WRdW[b]);
        rhs_y[i] += v;
      }

      dy = ldlt.solve(rhs_y);
      for (int refine = 0; refine < 2; ++refine) dy += ldlt.solve(rhs_y - H * dy);

      dS = zero_blocks();
      dX = zero_blocks();
      BlockMat Atdy = apply_At(dy);
      for (int b = 0; b < nb; ++b) {
        dS[b] = Rd[b] - Atdy[b];
        dX[b] = Rc[b] - scale_round(b, dS[b]);
        if (!prog.blocks[b].diagonal) dX[b] = sym(dX[b]);
      }
      return true;
    };

    Vec dy;
    BlockMat dX, dS;
    if (!solve_newton(0.0L, dy, dX, dS, nullptr, nullptr))
      return finish_best(SdpStatus::Failed, "factorization failure in predictor");
    Scalar ap = 1.0L, ad = 1.0L;
    for (int b = 0; b < nb; ++b) {
      ap = std::min(ap, max_step(prog.blocks[b], X[b], dX[b], 1.0L));
      ad = std::min(ad, max_step(prog.blocks[b], S[b], dS[b], 1.0L));
    }
    Scalar mu_aff;
    {
      BlockMat Xa = X, Sa = S;
      for (int b = 0; b < nb; ++b) {
        Xa[b] += ap * dX[b];
        Sa[b] += ad * dS[b];
      }
      mu_aff = dot_all(Xa, Sa) / N;
    }
    Scalar sigma = std::pow(std::max(Scalar(0), mu_aff / mu), Scalar(3));
    // blocked steps call for extra centering, not less
    const Scalar sigma_floor = prev_min_step < 0.1L ? 0.3L : 1e-6L;
    sigma = std::min(Scalar(0.9), std::max(sigma_floor, sigma));

    const BlockMat dX_aff = dX, dS_aff = dS;
    if (!solve_newton(sigma, dy, dX, dS, &dX_aff, &dS_aff))
      return finish_best(SdpStatus::Failed, "factorization failure in corrector");

    ap = ad = 1.0L;
    for (int b = 0; b < nb; ++b) {
      ap = std::min(ap, max_step(prog.blocks[b], X[b], dX[b], 0.98L));
      ad = std::min(ad, max_step(prog.blocks[b], S[b], dS[b], 0.98L));
    }
    // the eigenvalue floor makes max_step approximate; verify and shrink
    auto verified = [&](const BlockMat& Z, const BlockMat& dZ, Scalar a) {
      for (int b = 0; b < nb; ++b) {
        if (prog.blocks[b].diagonal) {
          if (((Z[b] + a * dZ[b]).col(0).array() <= 0.0L).any()) return false;
        } else {
          Eigen::LLT<Mat> llt(sym(Z[b] + a * dZ[b]));
          if (llt.info() != Eigen::Success) return false;
        }
      }
      return true;
    };
    for (int guard = 0; guard < 60 && !verified(X, dX, ap); ++guard) ap *= 0.8L;
    for (int guard = 0; guard < 60 && !verified(S, dS, ad); ++guard) ad *= 0.8L;

    // keep complementarity from collapsing ahead of primal feasibility,
    // which would pin the iterate to the boundary before r_p vanishes
    if (pres > opts.feas_tol) {
      Scalar mu_next = 0.0L;
      {
        BlockMat Xn = X, Sn = S;
        for (int b = 0; b < nb; ++b) {
          Xn[b] += ap * dX[b];
          Sn[b] += ad * dS[b];
        }
        mu_next = dot_all(Xn, Sn) / N;
      }
      const Scalar floor_mu = 1e-2L * mu0 * ((1.0L - ap) * pres / pres0);
      if (mu_next < floor_mu && mu_next < mu) {
        Scalar gamma = (floor_mu - mu) / (mu_next - mu);
        gamma = std::min(Scalar(1), std::max(Scalar(0.05), gamma));
        ap *= gamma;
        ad *= gamma;
      }
    }

    for (int b = 0; b < nb; ++b) {
      X[b] += ap * dX[b];
      S[b] += ad * dS[b];
    }
    y += ad * dy;
    prev_min_step = std::min(ap, ad);

    if (std::getenv("ROUTESIG_SDP_TRACE"))
      std::fprintf(stderr,
                   "it %3d mu=%.3Le gap=%.3Le pres=%.3Le dres=%.3Le sig=%.2Lf "
                   "ap=%.3Lf ad=%.3Lf\n",
                   iter, mu, gap, pres, dres_rel, sigma, ap, ad);
  }

  return finish_best(SdpStatus::Failed, "iteration cap reached");
}

}  // namespace routesig
