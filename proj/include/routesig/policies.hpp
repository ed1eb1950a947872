#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "routesig/scenario.hpp"

namespace routesig {

// Finite-support private signaling policy: m flow atoms on the participant
// simplex P_n(nu*T) (columns of `atoms`) and an s x m row-stochastic
// recommendation matrix. Diagonal policies have m = s and identity weights.
struct AtomicPrivatePolicy {
  Eigen::MatrixXd atoms;    // n x m, column k = atom x^(k)
  Eigen::MatrixXd weights;  // s x m, row w = distribution over atoms in state w
  double nu = 0.0;

  int num_atoms() const { return static_cast<int>(atoms.cols()); }
  bool is_diagonal() const;
};

// Public signaling policy: s x m row-stochastic message matrix.
struct PublicPolicy {
  Eigen::MatrixXd weights;  // s x m

  int num_messages() const { return static_cast<int>(weights.cols()); }
};

PublicPolicy full_information_policy(int s, int m);
PublicPolicy no_information_policy(int s, int m);
// kind is "full" or "no"; full requires m == s.
PublicPolicy canonical_policy(const std::string& kind, int s, int m);

// Joint posteriors over (atom, state) held by recommendation recipients and
// by agents outside the signaling scheme.
struct PosteriorTable {
  // recipient[i] = m x s table, entry (k, w) = P(atom k, state w | route i
  // recommended); absent when route i is never recommended.
  std::vector<std::optional<Eigen::MatrixXd>> recipient;
  std::vector<bool> never_recommended;
  Eigen::MatrixXd non_recipient;  // m x s, entry (k, w) = pi(k|w) mu0(w)
};

// Outcome of a design solve, together with its feasibility certificate data.
struct DesignSolution {
  AtomicPrivatePolicy policy;  // for public solutions, weights = message matrix
  RouteFlow y;                 // non-participant flow
  double cost = 0.0;
  double maxObedienceResidual = 0.0;
  double maxNashResidual = 0.0;
  std::optional<double> lowerBound;
  std::optional<double> gap;
  int startsUsed = 0;
  std::uint64_t seed = 0;
  std::string mode;  // "private", "diagonal" or "public"
};

void check_row_stochastic(const Eigen::MatrixXd& weights, double tol = 1e-9);

}  // namespace routesig
