#include "emukf/letkf.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <mutex>
#include <string>

#include "emukf/errors.hpp"
#include "emukf/parallel.hpp"
#include "emukf/rng.hpp"

namespace emukf {

namespace {

int cyclic_distance(int a, int b, int n) {
  int d = a - b;
  if (d < 0) d = -d;
  return std::min(d, n - d);
}

}  // namespace

void LetkfConfig::validate() const {
  if (localization_radius < 0) throw ConfigError("localization_radius must be >= 0");
  if (!(inflation_factor >= 1.0)) throw ConfigError("inflation factor must be >= 1");
  if (additive_inflation_std < 0.0) throw ConfigError("additive inflation std must be >= 0");
  if (!(obs_error_std > 0.0)) throw ConfigError("obs_error_std must be > 0");
  if (taper_gauss && !(taper_scale > 0.0)) throw ConfigError("taper_scale must be > 0");
}

std::pair<std::vector<int>, std::vector<ObsEntry>> local_patch(
    int center, int rho, int n, const ObservationSet& obs) {
  if (center < 0 || center >= n) {
    throw ConfigError("local_patch: center " + std::to_string(center) +
                      " outside grid [0, " + std::to_string(n) + ")");
  }
  std::vector<int> indices;
  if (2 * rho + 1 >= n) {
    indices.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) indices[static_cast<std::size_t>(i)] = i;
  } else {
    for (int off = -rho; off <= rho; ++off) {
      indices.push_back(((center + off) % n + n) % n);
    }
  }
  std::vector<ObsEntry> local;
  for (const auto& e : obs.entries) {
    if (cyclic_distance(e.index, center, n) <= rho) local.push_back(e);
  }
  return {std::move(indices), std::move(local)};
}

Ensemble apply_inflation(const Ensemble& e, const LetkfConfig& cfg,
                         std::uint64_t seed, int cycle) {
  cfg.validate();
  e.validate();
  if (cfg.inflation_factor == 1.0 && cfg.additive_inflation_std == 0.0) return e;

  const int n = e.dimension();
  const int k = e.size();
  const StateVector mean = ensemble_mean(e);
  Ensemble out = e;
  if (cfg.inflation_factor != 1.0) {
    for (int m = 0; m < k; ++m) {
      auto& vals = out.members[static_cast<std::size_t>(m)].values;
      for (int i = 0; i < n; ++i) {
        const std::size_t si = static_cast<std::size_t>(i);
        vals[si] = mean.values[si] + cfg.inflation_factor * (vals[si] - mean.values[si]);
      }
    }
  }
  if (cfg.additive_inflation_std > 0.0) {
    std::vector<double> noise(static_cast<std::size_t>(n) * static_cast<std::size_t>(k));
    std::vector<double> noise_mean(static_cast<std::size_t>(n), 0.0);
    for (int m = 0; m < k; ++m) {
      for (int i = 0; i < n; ++i) {
        const double z = cfg.additive_inflation_std *
                         counter_normal(seed, RngStream::kAdditiveInflation,
                                        static_cast<std::uint64_t>(cycle),
                                        static_cast<std::uint64_t>(m),
                                        static_cast<std::uint64_t>(i));
        noise[static_cast<std::size_t>(m) * static_cast<std::size_t>(n) + static_cast<std::size_t>(i)] = z;
        noise_mean[static_cast<std::size_t>(i)] += z;
      }
    }
    for (int i = 0; i < n; ++i) noise_mean[static_cast<std::size_t>(i)] /= static_cast<double>(k);
    for (int m = 0; m < k; ++m) {
      auto& vals = out.members[static_cast<std::size_t>(m)].values;
      for (int i = 0; i < n; ++i) {
        const std::size_t si = static_cast<std::size_t>(i);
        vals[si] += noise[static_cast<std::size_t>(m) * static_cast<std::size_t>(n) + si] -
                    noise_mean[si];
      }
    }
  }
  return out;
}

AnalysisProduct letkf_analysis(const Ensemble& forecast, const ObservationSet& obs,
                               const LetkfConfig& cfg, std::uint64_t seed, int cycle,
                               int threads) {
  cfg.validate();
  forecast.validate();
  const int n = forecast.dimension();
  const int k = forecast.size();
  if (k < 2) throw ValidationError("letkf_analysis: degenerate ensemble (k < 2)");
  for (const auto& m : forecast.members) {
    if (!m.all_finite()) throw ValidationError("letkf_analysis: non-finite forecast member");
  }
  for (const auto& e : obs.entries) {
    if (e.index < 0 || e.index >= n) {
      throw ValidationError("letkf_analysis: observation index " + std::to_string(e.index) +
                            " outside grid");
    }
    if (!std::isfinite(e.value)) throw ValidationError("letkf_analysis: non-finite observation");
  }

  const StateVector forecast_mean = ensemble_mean(forecast);
  const Ensemble inflated = apply_inflation(forecast, cfg, seed, cycle);

  // Inflated mean and perturbations; observation-space rows are slices of X'.
  const Eigen::MatrixXd X = ensemble_matrix(inflated);
  const Eigen::VectorXd xbar = X.rowwise().mean();
  const Eigen::MatrixXd Xpert = X.colwise() - xbar;

  AnalysisProduct out;
  out.forecast_mean = forecast_mean;
  out.analysis_mean.values.assign(static_cast<std::size_t>(n), 0.0);
  out.analysis_mean.time_index = forecast_mean.time_index;
  out.analysis_ensemble.members.assign(
      static_cast<std::size_t>(k),
      StateVector{std::vector<double>(static_cast<std::size_t>(n), 0.0),
                  forecast.members.front().time_index});

  const double rinv_base = 1.0 / (cfg.obs_error_std * cfg.obs_error_std);
  std::mutex failure_mutex;
  std::string failure;  // first per-point numerical failure, reported after join

  parallel_for(n, threads, [&](int g) {
    auto [patch_indices, local_obs] = local_patch(g, cfg.localization_radius, n, obs);
    (void)patch_indices;
    if (local_obs.empty()) {
      // No information: inflated forecast passes through unchanged.
      for (int m = 0; m < k; ++m) {
        out.analysis_ensemble.members[static_cast<std::size_t>(m)]
            .values[static_cast<std::size_t>(g)] = X(g, m);
      }
      out.analysis_mean.values[static_cast<std::size_t>(g)] = xbar(g);
      return;
    }

    const int p = static_cast<int>(local_obs.size());
    Eigen::MatrixXd Yl(p, k);
    Eigen::VectorXd dl(p);
    Eigen::VectorXd rinv(p);
    for (int j = 0; j < p; ++j) {
      const int oi = local_obs[static_cast<std::size_t>(j)].index;
      Yl.row(j) = Xpert.row(oi);
      dl(j) = local_obs[static_cast<std::size_t>(j)].value - xbar(oi);
      double w = rinv_base;
      if (cfg.taper_gauss) {
        const double d = cyclic_distance(oi, g, n);
        w *= std::exp(-0.5 * (d / cfg.taper_scale) * (d / cfg.taper_scale));
      }
      rinv(j) = w;
    }

    // Ensemble-space transform: A = (k-1)I + Y'^T R^-1 Y', symmetric PD.
    const Eigen::MatrixXd C = Yl.transpose() * rinv.asDiagonal();
    Eigen::MatrixXd A = C * Yl;
    A.diagonal().array() += static_cast<double>(k - 1);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A);
    if (es.info() != Eigen::Success || es.eigenvalues().minCoeff() <= 0.0) {
      const std::lock_guard<std::mutex> lock(failure_mutex);
      if (failure.empty()) {
        failure = "letkf_analysis: eigen-decomposition failed at grid point " +
                  std::to_string(g) + " (cycle " + std::to_string(cycle) + ")" +
                  " info=" + std::to_string(static_cast<int>(es.info())) +
                  " minlam=" + std::to_string(es.eigenvalues().minCoeff()) +
                  " maxA=" + std::to_string(A.cwiseAbs().maxCoeff()) +
                  " p=" + std::to_string(p);
      }
      return;
    }
    const Eigen::MatrixXd& Q = es.eigenvectors();
    const Eigen::VectorXd& lam = es.eigenvalues();

    const Eigen::VectorXd wbar = Q * (lam.cwiseInverse().asDiagonal() * (Q.transpose() * (C * dl)));
    const Eigen::MatrixXd W = std::sqrt(static_cast<double>(k - 1)) *
                              (Q * lam.cwiseSqrt().cwiseInverse().asDiagonal() * Q.transpose());

    const Eigen::RowVectorXd xg = Xpert.row(g);
    const double mean_g = xbar(g) + xg.dot(wbar);
    out.analysis_mean.values[static_cast<std::size_t>(g)] = mean_g;
    const Eigen::RowVectorXd pert_g = xg * W;
    for (int m = 0; m < k; ++m) {
      out.analysis_ensemble.members[static_cast<std::size_t>(m)]
          .values[static_cast<std::size_t>(g)] = mean_g + pert_g(m);
    }
  });

  if (!failure.empty()) throw NumericalError(failure);
  return out;
}

}  // namespace emukf
