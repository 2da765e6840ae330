#include "emukf/ensemble.hpp"

#include <string>

#include "emukf/errors.hpp"

namespace emukf {

void Ensemble::validate() const {
  if (members.empty()) throw ValidationError("empty ensemble");
  const int n = members.front().dimension();
  for (const auto& m : members) {
    if (m.dimension() != n) throw ValidationError("ensemble members differ in dimension");
  }
}

StateVector ensemble_mean(const Ensemble& e) {
  e.validate();
  const int n = e.dimension();
  const int k = e.size();
  StateVector mean;
  mean.time_index = e.members.front().time_index;
  mean.values.assign(static_cast<std::size_t>(n), 0.0);
  for (const auto& m : e.members) {
    for (int i = 0; i < n; ++i) mean.values[static_cast<std::size_t>(i)] += m.values[static_cast<std::size_t>(i)];
  }
  for (int i = 0; i < n; ++i) mean.values[static_cast<std::size_t>(i)] /= static_cast<double>(k);
  return mean;
}

Eigen::MatrixXd ensemble_matrix(const Ensemble& e) {
  e.validate();
  const int n = e.dimension();
  const int k = e.size();
  Eigen::MatrixXd X(n, k);
  for (int j = 0; j < k; ++j) {
    for (int i = 0; i < n; ++i) {
      X(i, j) = e.members[static_cast<std::size_t>(j)].values[static_cast<std::size_t>(i)];
    }
  }
  return X;
}

Eigen::MatrixXd ensemble_covariance(const Ensemble& e) {
  e.validate();
  const int k = e.size();
  if (k < 2) {
    throw ValidationError("degenerate ensemble: covariance requires k >= 2, got " +
                          std::to_string(k));
  }
  Eigen::MatrixXd X = ensemble_matrix(e);
  const Eigen::VectorXd mean = X.rowwise().mean();
  X.colwise() -= mean;
  return (X * X.transpose()) / static_cast<double>(k - 1);
}

}  // namespace emukf
