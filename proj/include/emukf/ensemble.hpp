#pragma once

#include <Eigen/Dense>

#include "emukf/state.hpp"

namespace emukf {

/// k model states sharing one grid.
struct Ensemble {
  std::vector<StateVector> members;

  int size() const { return static_cast<int>(members.size()); }
  int dimension() const { return members.empty() ? 0 : members.front().dimension(); }
  void validate() const;
};

/// Component-wise arithmetic mean of the members.
StateVector ensemble_mean(const Ensemble& e);

/// Sample covariance (k-1 normalization): (k-1)^-1 sum (x - xbar)(x - xbar)^T.
/// Throws on k < 2 (degenerate ensemble).
Eigen::MatrixXd ensemble_covariance(const Ensemble& e);

/// Members as columns of an n x k matrix.
Eigen::MatrixXd ensemble_matrix(const Ensemble& e);

}  // namespace emukf
