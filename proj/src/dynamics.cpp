#include "emukf/dynamics.hpp"

#include <cmath>
#include <string>

#include "emukf/errors.hpp"

namespace emukf {

namespace {

// Lorenz-63 classical parameters.
constexpr double kSigma = 10.0;
constexpr double kRho = 28.0;
constexpr double kBeta = 8.0 / 3.0;

std::vector<double> tendency_values(const ModelSpec& spec,
                                    const std::vector<double>& x) {
  const int n = static_cast<int>(x.size());
  std::vector<double> dx(static_cast<std::size_t>(n));
  if (spec.kind == ModelKind::lorenz96) {
    // dx_i/dt = (x_{i+1} - x_{i-2}) x_{i-1} - x_i + F, indices cyclic.
    for (int i = 0; i < n; ++i) {
      const int ip1 = (i + 1) % n;
      const int im1 = (i - 1 + n) % n;
      const int im2 = (i - 2 + n) % n;
      dx[static_cast<std::size_t>(i)] =
          (x[static_cast<std::size_t>(ip1)] - x[static_cast<std::size_t>(im2)]) *
              x[static_cast<std::size_t>(im1)] -
          x[static_cast<std::size_t>(i)] + spec.forcing;
    }
  } else {
    dx[0] = kSigma * (x[1] - x[0]);
    dx[1] = x[0] * (kRho - x[2]) - x[1];
    dx[2] = x[0] * x[1] - kBeta * x[2];
  }
  return dx;
}

}  // namespace

void ModelSpec::validate() const {
  if (kind == ModelKind::lorenz96 && dimension < 4) {
    throw ConfigError("lorenz96 requires dimension >= 4 (cyclic coupling), got " +
                      std::to_string(dimension));
  }
  if (kind == ModelKind::lorenz63 && dimension != 3) {
    throw ConfigError("lorenz63 has fixed dimension 3, got " + std::to_string(dimension));
  }
  if (!(dt > 0.0)) throw ConfigError("model dt must be > 0");
  if (steps_per_cycle < 1) throw ConfigError("steps_per_cycle must be >= 1");
}

StateVector tendency(const ModelSpec& spec, const StateVector& x) {
  spec.validate();
  if (x.dimension() != spec.dimension) {
    throw ConfigError("state dimension " + std::to_string(x.dimension()) +
                      " does not match model dimension " + std::to_string(spec.dimension));
  }
  if (!x.all_finite()) throw ValidationError("tendency: non-finite state");
  return StateVector{tendency_values(spec, x.values), x.time_index};
}

std::vector<double> rk4_step(
    const std::function<std::vector<double>(const std::vector<double>&)>& f,
    const std::vector<double>& x, double dt) {
  const std::size_t n = x.size();
  const std::vector<double> k1 = f(x);
  std::vector<double> tmp(n);
  for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + 0.5 * dt * k1[i];
  const std::vector<double> k2 = f(tmp);
  for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + 0.5 * dt * k2[i];
  const std::vector<double> k3 = f(tmp);
  for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + dt * k3[i];
  const std::vector<double> k4 = f(tmp);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = x[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
  }
  return out;
}

StateVector integrate(const ModelSpec& spec, const StateVector& x, int n_steps) {
  spec.validate();
  if (n_steps < 0) throw ConfigError("integrate: n_steps must be >= 0");
  if (x.dimension() != spec.dimension) {
    throw ConfigError("state dimension " + std::to_string(x.dimension()) +
                      " does not match model dimension " + std::to_string(spec.dimension));
  }
  if (n_steps == 0) return x;
  const auto f = [&spec](const std::vector<double>& v) { return tendency_values(spec, v); };
  StateVector out = x;
  for (int step = 0; step < n_steps; ++step) {
    out.values = rk4_step(f, out.values, spec.dt);
    if (!out.all_finite()) {
      throw NumericalError("integration blowup at step " + std::to_string(step + 1) +
                           " of " + std::to_string(n_steps) + " (time_index " +
                           std::to_string(out.time_index) + ")");
    }
    out.time_index += 1;
  }
  return out;
}

}  // namespace emukf
