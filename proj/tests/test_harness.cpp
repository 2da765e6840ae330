#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "emukf/errors.hpp"
#include "emukf/harness.hpp"
#include "emukf/rng.hpp"

using namespace emukf;

namespace {

ExperimentManifest small_manifest() {
  ExperimentManifest m;
  m.model.dimension = 40;
  m.spin_up_cycles = 200;
  m.training_cycles = 60;
  m.hindcast_cycles = 12;
  m.ensemble_size = 12;
  m.obs_density = 0.5;
  m.obs_sigma = 1.0;
  m.letkf.localization_radius = 3;
  m.seed = 4242;
  return m;
}

ObservationNetwork manifest_network(const ExperimentManifest& m) {
  return build_network(m.model.dimension, m.obs_density,
                       derive_seed(m.seed, RngStream::kObsNoise), m.obs_schedule,
                       m.obs_sigma);
}

/// Emulator that reproduces the forecast input to rounding (see the
/// emulator suite for the linearization trick).
EmulatorSet passthrough_emulator(const ExperimentManifest& m) {
  EmulatorSet emu;
  emu.partition = make_partition(m.model.dimension, m.n_regions);
  emu.pseudo_cfg = m.pseudo;
  emu.n_variables = 1;
  emu.entries.resize(static_cast<std::size_t>(m.n_regions));
  for (auto& e : emu.entries) {
    MlpNetwork net = make_zero_mlp();
    const double eps = 1e-6;
    net.w_hidden[1] = eps;
    net.w_out[0] = 2.0 / (net.activation_slope * eps);
    e.mlp.net = std::move(net);
    e.mlp.input_scaling = {FeatureScaling{0.0, 1.0}, FeatureScaling{0.0, 1.0}};
    e.mlp.target_scaling = FeatureScaling{0.0, 1.0};
    e.trained = true;
  }
  return emu;
}

}  // namespace

TEST_CASE("truth run stores one state per cycle plus the start") {
  ExperimentManifest m = small_manifest();
  m.spin_up_cycles = 0;
  m.training_cycles = 1;
  m.hindcast_cycles = 1;
  const TruthRun truth = run_truth(m);
  CHECK(truth.states.size() == 3);  // cycles 0, 1, 2
  CHECK(truth.states[0].time_index == 0);
  CHECK(truth.states[2].time_index == 2 * m.model.steps_per_cycle);
}

TEST_CASE("identical manifests give bit-identical truth runs") {
  const ExperimentManifest m = small_manifest();
  const TruthRun a = run_truth(m);
  const TruthRun b = run_truth(m);
  REQUIRE(a.states.size() == b.states.size());
  for (std::size_t i = 0; i < a.states.size(); ++i) {
    CHECK(a.states[i].values == b.states[i].values);
  }
  CHECK(a.climatological_std == b.climatological_std);
}

TEST_CASE("long truth trajectories stay bounded") {
  ExperimentManifest m = small_manifest();
  m.spin_up_cycles = 100;
  m.training_cycles = 9900;
  m.hindcast_cycles = 100;
  const TruthRun truth = run_truth(m);
  double max_abs = 0.0;
  for (const auto& s : truth.states) {
    for (double v : s.values) max_abs = std::max(max_abs, std::abs(v));
  }
  CHECK(max_abs < 25.0);
  CHECK(truth.climatological_std > 2.0);
  CHECK(truth.climatological_std < 6.0);
}

TEST_CASE("rmse contract") {
  const StateVector a = make_state({1.0, 2.0, 3.0, 4.0});
  CHECK(rmse(a, a) == 0.0);

  StateVector b = a;
  for (auto& v : b.values) v += 0.75;
  CHECK(rmse(a, b) == doctest::Approx(0.75).epsilon(1e-15));

  StateVector c = make_state({1.5, -2.0, 0.25, 9.0});
  double ss = 0.0;
  for (int i = 3; i >= 0; --i) {
    const double d = a.values[static_cast<std::size_t>(i)] - c.values[static_cast<std::size_t>(i)];
    ss += d * d;
  }
  const double oracle = std::sqrt(ss / 4.0);
  CHECK(rmse(a, c) == doctest::Approx(oracle).epsilon(1e-13));

  CHECK(rmse(a, c, {1, 3}) ==
        doctest::Approx(std::sqrt((16.0 + 25.0) / 2.0)).epsilon(1e-13));
  CHECK_THROWS_AS(rmse(a, make_state({1.0})), ConfigError);
}

TEST_CASE("near-exact dense observations collapse the analysis error") {
  ExperimentManifest m = small_manifest();
  m.obs_density = 1.0;
  m.obs_sigma = 1e-6;
  m.training_cycles = 50;
  const TruthRun truth = run_truth(m);
  const ObservationNetwork net = manifest_network(m);
  const LetkfPeriod period = run_letkf_period(m, truth, make_obs_provider(m, net, truth));
  CHECK(period.analysis_rmse.back() < 1e-3);
  // The first background still carries the O(1) initialization error.
  CHECK(period.forecast_rmse.front() > 0.1);
  CHECK(period.analysis_rmse.back() < period.forecast_rmse.front() / 100.0);
}

TEST_CASE("without observations the filter relaxes to the free run") {
  ExperimentManifest m = small_manifest();
  m.training_cycles = 400;
  const TruthRun truth = run_truth(m);
  const ObsProvider empty = [](int cycle) {
    ObservationSet obs;
    obs.cycle = cycle;
    return obs;
  };
  const LetkfPeriod period = run_letkf_period(m, truth, empty);
  double tail_mean = 0.0;
  for (std::size_t i = period.analysis_rmse.size() - 100; i < period.analysis_rmse.size(); ++i) {
    tail_mean += period.analysis_rmse[i];
  }
  tail_mean /= 100.0;
  CHECK(tail_mean > truth.climatological_std);
}

TEST_CASE("assimilation beats the observation error at modest scale") {
  ExperimentManifest m = small_manifest();
  m.training_cycles = 300;
  const TruthRun truth = run_truth(m);
  const ObservationNetwork net = manifest_network(m);
  const LetkfPeriod period = run_letkf_period(m, truth, make_obs_provider(m, net, truth), 2);
  double tail_mean = 0.0;
  for (std::size_t i = 100; i < period.analysis_rmse.size(); ++i) {
    tail_mean += period.analysis_rmse[i];
  }
  tail_mean /= static_cast<double>(period.analysis_rmse.size() - 100);
  CHECK(tail_mean < m.obs_sigma);
}

TEST_CASE("letkf period reruns are bit-identical") {
  ExperimentManifest m = small_manifest();
  m.training_cycles = 30;
  const TruthRun truth = run_truth(m);
  const ObservationNetwork net = manifest_network(m);
  const LetkfPeriod a = run_letkf_period(m, truth, make_obs_provider(m, net, truth), 1);
  const LetkfPeriod b = run_letkf_period(m, truth, make_obs_provider(m, net, truth), 2);
  REQUIRE(a.records.size() == b.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    CHECK(a.records[i].analysis_mean.values == b.records[i].analysis_mean.values);
    CHECK(a.records[i].forecast_mean.values == b.records[i].forecast_mean.values);
  }
  for (int mi = 0; mi < a.final_ensemble.size(); ++mi) {
    CHECK(a.final_ensemble.members[static_cast<std::size_t>(mi)].values ==
          b.final_ensemble.members[static_cast<std::size_t>(mi)].values);
  }
}

TEST_CASE("an analysis depends only on past and current observations") {
  ExperimentManifest m = small_manifest();
  m.training_cycles = 20;
  const TruthRun truth = run_truth(m);
  const ObservationNetwork net = manifest_network(m);
  const ObsProvider clean = make_obs_provider(m, net, truth);
  const ObsProvider tampered = [&clean](int cycle) {
    ObservationSet obs = clean(cycle);
    if (cycle > 15) {
      for (auto& e : obs.entries) e.value += 1.0;
    }
    return obs;
  };
  const LetkfPeriod a = run_letkf_period(m, truth, clean);
  const LetkfPeriod b = run_letkf_period(m, truth, tampered);
  for (int c = 0; c < 15; ++c) {
    CHECK(a.records[static_cast<std::size_t>(c)].analysis_mean.values ==
          b.records[static_cast<std::size_t>(c)].analysis_mean.values);
  }
  CHECK(a.records[16].analysis_mean.values != b.records[16].analysis_mean.values);
}

TEST_CASE("wild observations trigger the divergence guard") {
  ExperimentManifest m = small_manifest();
  m.training_cycles = 40;
  m.obs_sigma = 1e-3;
  const TruthRun truth = run_truth(m);
  const ObservationNetwork net = manifest_network(m);
  const ObsProvider hostile = [&net](int cycle) {
    ObservationSet obs;
    obs.cycle = cycle;
    for (int idx : net.observed_indices) obs.entries.push_back({idx, 1e7, false});
    return obs;
  };
  CHECK_THROWS_AS(run_letkf_period(m, truth, hostile), NumericalError);
}

TEST_CASE("passthrough emulator reproduces the free model run") {
  ExperimentManifest m = small_manifest();
  m.training_cycles = 5;
  m.hindcast_cycles = 20;
  m.compare_letkf_in_hindcast = false;
  const TruthRun truth = run_truth(m);
  const ObservationNetwork net = manifest_network(m);
  const EmulatorSet emu = passthrough_emulator(m);
  const StateVector start = truth.states[static_cast<std::size_t>(m.training_cycles)];

  const auto rows = run_nn_period(m, emu, start, std::nullopt, truth, net,
                                  make_obs_provider(m, net, truth));
  REQUIRE(rows.size() == 20);

  StateVector free_state = start;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    free_state = advance_cycle(m.model, free_state);
    const int cycle = m.training_cycles + 1 + static_cast<int>(i);
    const double free_rmse =
        rmse(free_state, truth.states[static_cast<std::size_t>(cycle)]);
    CHECK(rows[i].method == "nn");
    CHECK(rows[i].rmse_analysis == doctest::Approx(free_rmse).epsilon(1e-6));
  }
}

TEST_CASE("hindcast report has the expected shape") {
  ExperimentManifest m = small_manifest();
  m.training_cycles = 20;
  m.hindcast_cycles = 8;
  const TruthRun truth = run_truth(m);
  const ObservationNetwork net = manifest_network(m);
  const ObsProvider provider = make_obs_provider(m, net, truth);
  const LetkfPeriod period = run_letkf_period(m, truth, provider);
  const EmulatorSet emu = passthrough_emulator(m);
  const StateVector start = period.records.back().analysis_mean;
  const auto rows =
      run_nn_period(m, emu, start, period.final_ensemble, truth, net, provider);
  REQUIRE(rows.size() == 16);  // one letkf row and one nn row per cycle
  int nn_rows = 0, letkf_rows = 0;
  for (const auto& r : rows) {
    if (r.method == "nn") {
      ++nn_rows;
      CHECK(r.obs_count >= 20);  // pseudo spreading adds points
      CHECK(r.mean_abs_diff >= 0.0);
    } else {
      ++letkf_rows;
      CHECK(r.obs_count == 20);
    }
    CHECK(r.analysis_seconds > 0.0);
    CHECK(r.cycle_seconds >= r.analysis_seconds);
    CHECK(r.rmse_analysis >= 0.0);
  }
  CHECK(nn_rows == 8);
  CHECK(letkf_rows == 8);
}

TEST_CASE("timing report separates ensemble and single-model cost") {
  std::vector<CycleReportRow> rows;
  for (int c = 1; c <= 5; ++c) {
    CycleReportRow letkf_row;
    letkf_row.cycle = c;
    letkf_row.method = "letkf";
    letkf_row.analysis_seconds = 0.010;
    letkf_row.cycle_seconds = 0.014;
    rows.push_back(letkf_row);
    CycleReportRow nn_row;
    nn_row.cycle = c;
    nn_row.method = "nn";
    nn_row.analysis_seconds = 0.001;
    nn_row.cycle_seconds = 0.0012;
    rows.push_back(nn_row);
  }
  const TimingSummary summary = timing_report(rows);
  REQUIRE(summary.methods.size() == 2);
  const MethodTiming& letkf = summary.methods[0];
  const MethodTiming& nn = summary.methods[1];
  CHECK(letkf.method == "letkf");
  CHECK(letkf.cycles == 4);  // warm-up cycle excluded
  CHECK(letkf.analysis_total == doctest::Approx(0.040));
  CHECK(letkf.ensemble_total == doctest::Approx(0.016));
  CHECK(letkf.single_model_total == 0.0);
  CHECK(nn.ensemble_total == 0.0);
  CHECK(nn.single_model_total == doctest::Approx(0.0008));
  REQUIRE(summary.analysis_speedup.has_value());
  CHECK(*summary.analysis_speedup == doctest::Approx(10.0));

  std::vector<CycleReportRow> nn_only;
  for (const auto& r : rows) {
    if (r.method == "nn") nn_only.push_back(r);
  }
  const TimingSummary partial = timing_report(nn_only);
  CHECK(partial.methods.size() == 1);
  CHECK_FALSE(partial.analysis_speedup.has_value());
  CHECK_FALSE(partial.cycle_speedup.has_value());
}

TEST_CASE("report CSV round-trips the metric columns exactly") {
  const auto dir = std::filesystem::temp_directory_path() / "emukf_report_test";
  std::filesystem::create_directories(dir);
  std::vector<CycleReportRow> rows;
  for (int c = 1; c <= 3; ++c) {
    CycleReportRow r;
    r.cycle = c;
    r.method = c % 2 == 0 ? "nn" : "letkf";
    r.rmse_analysis = 0.123456789012345 + c;
    r.rmse_forecast = 1.0 / (3.0 + c);
    r.mean_abs_diff = 1e-4 * c;
    r.analysis_seconds = 0.001 * c;
    r.cycle_seconds = 0.002 * c;
    r.obs_count = 20 + c;
    rows.push_back(r);
  }
  save_report_csv(rows, dir / "report.csv");
  const auto loaded = load_report_csv(dir / "report.csv");
  REQUIRE(loaded.size() == rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(loaded[i].cycle == rows[i].cycle);
    CHECK(loaded[i].method == rows[i].method);
    CHECK(loaded[i].rmse_analysis == rows[i].rmse_analysis);
    CHECK(loaded[i].rmse_forecast == rows[i].rmse_forecast);
    CHECK(loaded[i].mean_abs_diff == rows[i].mean_abs_diff);
    CHECK(loaded[i].obs_count == rows[i].obs_count);
  }
  std::filesystem::remove_all(dir);
}
