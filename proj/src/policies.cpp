#include "routesig/policies.hpp"

#include <stdexcept>

namespace routesig {

bool AtomicPrivatePolicy::is_diagonal() const {
  if (weights.rows() != weights.cols()) return false;
  return weights.isIdentity(1e-12);
}

PublicPolicy full_information_policy(int s, int m) {
  if (m != s)
    throw std::runtime_error("full information policy requires m == s");
  PublicPolicy p;
  p.weights = Eigen::MatrixXd::Identity(s, m);
  return p;
}

PublicPolicy no_information_policy(int s, int m) {
  if (m < 1) throw std::runtime_error("no information policy requires m >= 1");
  PublicPolicy p;
  p.weights = Eigen::MatrixXd::Zero(s, m);
  p.weights.col(0).setOnes();
  return p;
}

PublicPolicy canonical_policy(const std::string& kind, int s, int m) {
  if (kind == "full") return full_information_policy(s, m);
  if (kind == "no") return no_information_policy(s, m);
  throw std::runtime_error("unknown canonical policy kind '" + kind + "'");
}

void check_row_stochastic(const Eigen::MatrixXd& weights, double tol) {
  for (int r = 0; r < weights.rows(); ++r) {
    if (weights.row(r).minCoeff() < -tol)
      throw std::runtime_error("policy matrix has a negative entry");
    if (std::abs(weights.row(r).sum() - 1.0) > tol)
      throw std::runtime_error("policy matrix row does not sum to 1");
  }
}

}  // namespace routesig
