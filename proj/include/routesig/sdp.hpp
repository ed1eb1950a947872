#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace routesig {

// Block-diagonal semidefinite program in standard primal form:
//   min sum_b <C_b, X_b>   s.t.   sum_b <A_{i,b}, X_b> = rhs_i,   X_b >= 0.
// Diagonal blocks hold their entries in a size x 1 matrix.
struct SdpBlockSpec {
  int size = 0;
  bool diagonal = false;
};

using SdpBlockMat = std::vector<Eigen::MatrixXd>;

struct SdpProgram {
  std::vector<SdpBlockSpec> blocks;
  SdpBlockMat C;
  std::vector<SdpBlockMat> A;
  Eigen::VectorXd rhs;

  SdpBlockMat zero_blocks() const;
  int total_dim() const;
};

enum class SdpStatus { Optimal, Infeasible, Failed };

struct SdpOptions {
  double gap_tol = 1e-8;
  double feas_tol = 1e-8;
  int max_iterations = 200;
};

struct SdpSolution {
  SdpStatus status = SdpStatus::Failed;
  SdpBlockMat X;
  SdpBlockMat S;
  Eigen::VectorXd y;
  double primal_objective = 0.0;
  double dual_objective = 0.0;
  double relative_gap = 0.0;
  double primal_infeasibility = 0.0;
  double dual_infeasibility = 0.0;
  int iterations = 0;
  std::string message;
};

// Dense primal-dual path-following interior-point method with
// Nesterov-Todd scaling; intended for the small programs built here.
SdpSolution solve_sdp(const SdpProgram& prog, const SdpOptions& opts = {});

}  // namespace routesig
