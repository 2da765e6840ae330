#pragma once

#include <functional>

#include "emukf/state.hpp"

namespace emukf {

enum class ModelKind { lorenz96, lorenz63 };

/// Forecast-model configuration. lorenz96 runs on a periodic ring of n
/// points; lorenz63 is the fixed 3-variable system kept for smoke tests.
struct ModelSpec {
  ModelKind kind = ModelKind::lorenz96;
  int dimension = 40;
  double forcing = 8.0;         // lorenz96 F
  double dt = 0.05;
  int steps_per_cycle = 1;      // the "6-hour" analogue

  void validate() const;
};

/// Time derivative of the model state. Cyclic boundary on the ring.
StateVector tendency(const ModelSpec& spec, const StateVector& x);

/// One classical RK4 step of a generic system, exposed so the integrator can
/// be checked against closed-form solutions.
std::vector<double> rk4_step(
    const std::function<std::vector<double>(const std::vector<double>&)>& f,
    const std::vector<double>& x, double dt);

/// Advances n_steps fixed RK4 steps of size spec.dt. n_steps = 0 returns the
/// input unchanged; time_index advances by n_steps. Throws NumericalError
/// naming the step if the state leaves the finite range.
StateVector integrate(const ModelSpec& spec, const StateVector& x, int n_steps);

/// Convenience: one assimilation cycle worth of model steps.
inline StateVector advance_cycle(const ModelSpec& spec, const StateVector& x) {
  return integrate(spec, x, spec.steps_per_cycle);
}

}  // namespace emukf
