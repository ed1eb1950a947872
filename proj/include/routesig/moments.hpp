#pragma once

#include <Eigen/Dense>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "routesig/scenario.hpp"
#include "routesig/sdp.hpp"

namespace routesig {

// Exponent vector over the participant-flow variables of one state.
using Monomial = std::vector<int>;

// Paper-style monomial listing: degree tiers of ordered index tuples, i.e.
// 1, x_1..x_n, x_1 x_1, x_1 x_2, ..., x_n x_n, ... up to the moment-basis
// degree for latencies of degree D. Duplicates (x_1 x_2 vs x_2 x_1) are kept.
std::vector<std::vector<int>> monomial_vector(int n, int D);

// Degree bound of the moment basis for latency degree D.
int moment_basis_degree(int D);

struct MomentBlock {
  std::string name;
  std::vector<Monomial> basis;  // deduplicated, graded ordering
  int size() const { return static_cast<int>(basis.size()); }
};

// sum_b <coeff[b], M_b> (sense) rhs over the block moment matrices.
struct MomentConstraint {
  std::vector<Eigen::MatrixXd> coeff;
  double rhs = 0.0;
  char sense = '>';  // '>' means >=, '=' equality
  std::string label;
};

// First-level moment relaxation: PSD moment matrix per block, linear
// objective and constraints over their entries.
struct MomentProgram {
  std::vector<MomentBlock> blocks;
  std::vector<Eigen::MatrixXd> objective;
  std::vector<MomentConstraint> constraints;

  // metadata and named matrices of the one-matrix design form
  bool diagonal_form = false;
  int s = 0, n = 0;
  double participant_mass = 0.0;  // nu * T
  double outsider_mass = 0.0;     // (1 - nu) * T
  Eigen::MatrixXd C;
  std::vector<Eigen::MatrixXd> A;   // n*n entries, index i*n+j, i != j used
  std::vector<Eigen::MatrixXd> B;
  std::vector<Eigen::MatrixXd> Sx;  // per state
  Eigen::MatrixXd Sy;
  std::vector<Eigen::MatrixXd> Tx;  // per (state k, route i): k*n + i
  std::vector<Eigen::MatrixXd> Ty;  // per route
  int dim() const { return (s + 1) * n + 1; }

  SdpProgram to_sdp() const;
};

// Truncated-moment admissibility data for a candidate moment matrix.
struct TmsCheck {
  enum class Verdict { Rank1Admissible, NotRank1, ConstraintViolated };
  Eigen::MatrixXd M;
  double massTolerance = 1e-8;
  double eigenRatioThreshold = 1e-6;
  Verdict verdict = Verdict::ConstraintViolated;
  std::optional<Eigen::VectorXd> extractedPoint;
  double eigenRatio = 0.0;
  double worstViolation = 0.0;
};

// Moment relaxation of the diagonal design problem for affine latencies,
// over the rank-relaxed outer product of (1, x^{w_1}, ..., x^{w_s}, y).
MomentProgram build_diagonal_sdp(const RoutingScenario& sc, double nu);

// Per-state moment relaxation of the participant design problem with the
// non-participant flow held fixed.
MomentProgram build_gpm_fixed_y(const RoutingScenario& sc, const RouteFlow& y);

struct MomentSolveResult {
  SdpStatus status = SdpStatus::Failed;
  double value = 0.0;
  Eigen::MatrixXd M;  // first block moment matrix
  std::vector<Eigen::MatrixXd> block_moments;
  double relativeGap = 0.0;
  std::optional<TmsCheck> tms;  // populated for the diagonal form
  std::string message;
};

MomentSolveResult solve_moment_sdp(const MomentProgram& prog,
                                   const SdpOptions& opts = {});

// Admissibility of a moment matrix over the product of simplices with the
// given block masses: PSD, entrywise nonnegative, mass and second-moment
// consistency rows, and a rank-1 spectrum test with atom extraction.
TmsCheck check_rank1(const Eigen::MatrixXd& M, int s, int n, double participant_mass,
                     double outsider_mass);

// Exact interval-moment program for two-route scenarios with fixed y:
// per-state moments of measures on [0, nu*T] with Hankel conditions.
struct UnivariateResult {
  SdpStatus status = SdpStatus::Failed;
  double value = 0.0;
  std::vector<Eigen::VectorXd> moments;  // per state, degree 0..D+1
  std::string message;
};
UnivariateResult two_link_univariate_sdp(const RoutingScenario& sc, const RouteFlow& y,
                                         const SdpOptions& opts = {});

// Sparse SDPA surface: the program is written as an LMI over the
// upper-triangular moment-matrix entries; equality rows are split into
// paired inequalities and all scalar rows live in one diagonal block.
struct SdpaEntry {
  int matno = 0, blkno = 0, i = 0, j = 0;
  double value = 0.0;
};
struct SdpaFile {
  std::vector<std::string> comments;
  std::vector<int> block_sizes;  // negative = diagonal block
  Eigen::VectorXd c;
  std::vector<SdpaEntry> entries;
};

SdpaFile sdpa_encode(const MomentProgram& prog);
void write_sdpa(const SdpaFile& file, const std::string& path);
SdpaFile read_sdpa(const std::string& path);
void export_sdpa(const MomentProgram& prog, const std::string& path);

// Solves the program stored in an SDPA file through its conic companion;
// returns the optimal objective value of the file's minimization.
double solve_sdpa_file(const SdpaFile& file, const SdpOptions& opts = {});

}  // namespace routesig
