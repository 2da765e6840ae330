#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "emukf/dynamics.hpp"
#include "emukf/errors.hpp"
#include "emukf/state.hpp"

using namespace emukf;

namespace {

ModelSpec l96_spec(int n = 40, double forcing = 8.0, double dt = 0.05) {
  ModelSpec s;
  s.kind = ModelKind::lorenz96;
  s.dimension = n;
  s.forcing = forcing;
  s.dt = dt;
  return s;
}

ModelSpec l63_spec() {
  ModelSpec s;
  s.kind = ModelKind::lorenz63;
  s.dimension = 3;
  s.dt = 0.01;
  return s;
}

// Independent evaluation of the cyclic ring formula, written as a separate
// loop so it cannot share an indexing mistake with the implementation.
std::vector<double> ring_tendency_oracle(const std::vector<double>& x, double forcing) {
  const int n = static_cast<int>(x.size());
  std::vector<double> dx(x.size());
  for (int i = 0; i < n; ++i) {
    const double xp1 = x[static_cast<std::size_t>((i + 1 + n) % n)];
    const double xm1 = x[static_cast<std::size_t>((i - 1 + n) % n)];
    const double xm2 = x[static_cast<std::size_t>((i - 2 + 2 * n) % n)];
    dx[static_cast<std::size_t>(i)] = (xp1 - xm2) * xm1 - x[static_cast<std::size_t>(i)] + forcing;
  }
  return dx;
}

}  // namespace

TEST_CASE("ring tendency vanishes at the constant fixed point") {
  const ModelSpec spec = l96_spec();
  const StateVector x = make_state(std::vector<double>(40, 8.0));
  const StateVector dx = tendency(spec, x);
  for (double v : dx.values) CHECK(v == 0.0);
}

TEST_CASE("ring tendency matches the hand-evaluated cyclic formula") {
  const ModelSpec spec = l96_spec(4);
  const StateVector x = make_state({1.0, 2.0, 3.0, 4.0});
  const StateVector dx = tendency(spec, x);
  // Worked by hand: ((x1-x2)x3-x0+F, (x2-x3)x0-x1+F, (x3-x0)x1-x2+F, (x0-x1)x2-x3+F)
  CHECK(dx.values[0] == doctest::Approx(3.0).epsilon(1e-15));
  CHECK(dx.values[1] == doctest::Approx(5.0).epsilon(1e-15));
  CHECK(dx.values[2] == doctest::Approx(11.0).epsilon(1e-15));
  CHECK(dx.values[3] == doctest::Approx(1.0).epsilon(1e-15));

  const auto oracle = ring_tendency_oracle(x.values, spec.forcing);
  for (std::size_t i = 0; i < 4; ++i) CHECK(dx.values[i] == oracle[i]);
}

TEST_CASE("ring tendency oracle agrees on random states") {
  const ModelSpec spec = l96_spec(17, 6.5);
  std::vector<double> vals(17);
  for (int i = 0; i < 17; ++i) vals[static_cast<std::size_t>(i)] = std::sin(1.7 * i) * 5.0;
  const StateVector dx = tendency(spec, make_state(vals));
  const auto oracle = ring_tendency_oracle(vals, spec.forcing);
  for (std::size_t i = 0; i < vals.size(); ++i) {
    CHECK(dx.values[i] == doctest::Approx(oracle[i]).epsilon(1e-14));
  }
}

TEST_CASE("lorenz63 has an equilibrium at the origin") {
  const StateVector dx = tendency(l63_spec(), make_state({0.0, 0.0, 0.0}));
  CHECK(dx.values[0] == 0.0);
  CHECK(dx.values[1] == 0.0);
  CHECK(dx.values[2] == 0.0);
}

TEST_CASE("tendency rejects a dimension mismatch") {
  CHECK_THROWS_AS(tendency(l96_spec(40), make_state({1.0, 2.0})), ConfigError);
  CHECK_THROWS_AS(l96_spec(3).validate(), ConfigError);
}

TEST_CASE("integrate with zero steps is the identity") {
  const ModelSpec spec = l96_spec();
  StateVector x = make_state(std::vector<double>(40, 8.0), 7);
  x.values[3] = 2.5;
  const StateVector y = integrate(spec, x, 0);
  CHECK(y.values == x.values);
  CHECK(y.time_index == x.time_index);
}

TEST_CASE("one RK4 step of dx/dt = -x matches the exponential to O(dt^5)") {
  const auto f = [](const std::vector<double>& v) {
    return std::vector<double>{-v[0]};
  };
  const auto y = rk4_step(f, {1.0}, 0.1);
  // Local truncation error of classical RK4 on the linear system is
  // dt^5/5! ~ 8.3e-8 for dt = 0.1.
  CHECK(std::abs(y[0] - std::exp(-0.1)) < 1e-7);
}

TEST_CASE("spun-up ring trajectory stays inside the attractor bound") {
  const ModelSpec spec = l96_spec();
  StateVector x = make_state(std::vector<double>(40, 8.0));
  x.values[20] += 0.01;
  double max_abs = 0.0;
  for (int chunk = 0; chunk < 10; ++chunk) {
    x = integrate(spec, x, 100);
    for (double v : x.values) max_abs = std::max(max_abs, std::abs(v));
  }
  CHECK(x.time_index == 1000);
  CHECK(max_abs < 25.0);
  CHECK(x.all_finite());
}

TEST_CASE("fixed-step integration composes bit-exactly") {
  const ModelSpec spec = l96_spec();
  StateVector x = make_state(std::vector<double>(40, 8.0));
  x.values[11] += 0.3;
  x = integrate(spec, x, 200);  // move onto the attractor

  const StateVector whole = integrate(spec, x, 7 + 13);
  const StateVector split = integrate(spec, integrate(spec, x, 7), 13);
  CHECK(whole.values == split.values);
  CHECK(whole.time_index == split.time_index);
}

TEST_CASE("fixed points stay fixed under integration") {
  {
    const ModelSpec spec = l96_spec();
    const StateVector x = make_state(std::vector<double>(40, 8.0));
    const StateVector y = integrate(spec, x, 50);
    for (std::size_t i = 0; i < x.values.size(); ++i) {
      CHECK(std::abs(y.values[i] - x.values[i]) < 1e-12);
    }
  }
  {
    const StateVector y = integrate(l63_spec(), make_state({0.0, 0.0, 0.0}), 50);
    for (double v : y.values) CHECK(std::abs(v) < 1e-12);
  }
}

TEST_CASE("integration blowup reports the failing step") {
  ModelSpec spec = l96_spec(8, 8.0, 50.0);  // absurd step size forces divergence
  StateVector x = make_state(std::vector<double>(8, 8.0));
  x.values[0] += 1.0;
  try {
    integrate(spec, x, 1000);
    FAIL("expected a blowup");
  } catch (const NumericalError& e) {
    CHECK(std::string(e.what()).find("step") != std::string::npos);
  }
}

TEST_CASE("binary snapshots round-trip bit-exactly") {
  const auto dir = std::filesystem::temp_directory_path() / "emukf_state_test";
  std::filesystem::create_directories(dir);
  StateVector x = make_state({1.0 / 3.0, -2.7182818284590452, 0.0, 1e-300, 4e15}, 42);
  const auto path = dir / "state.bin";
  save_state_binary(x, path);
  const StateVector y = load_state_binary(path);
  CHECK(y.values == x.values);
  CHECK(y.time_index == 42);

  const auto csv_path = dir / "state.csv";
  save_state_csv(x, csv_path);
  const StateVector z = load_state_csv(csv_path);
  CHECK(z.values == x.values);
  CHECK(z.time_index == 42);

  // A corrupted header is rejected.
  save_state_csv(x, dir / "bad.bin");
  CHECK_THROWS_AS(load_state_binary(dir / "bad.bin"), IoError);
  std::filesystem::remove_all(dir);
}
