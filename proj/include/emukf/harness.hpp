#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "emukf/dynamics.hpp"
#include "emukf/emulator.hpp"
#include "emukf/letkf.hpp"
#include "emukf/mlp.hpp"
#include "emukf/observations.hpp"

namespace emukf {

/// Everything a full twin experiment needs, fixed before any run.
struct ExperimentManifest {
  ModelSpec model;
  double obs_density = 0.5;
  double obs_sigma = 1.0;
  ObsSchedule obs_schedule = ObsSchedule::every_cycle;
  int ensemble_size = 30;
  LetkfConfig letkf;
  double ensemble_init_spread = 1.0;
  PseudoObsConfig pseudo;
  int n_regions = 6;
  int n_variables = 1;
  int mlp_hidden = 11;
  double mlp_activation_slope = 2.0;
  TrainConfig train;
  int spin_up_cycles = 1440;
  int training_cycles = 1200;
  int hindcast_cycles = 112;
  bool compare_letkf_in_hindcast = true;
  std::uint64_t seed = 42;

  int total_cycles() const { return training_cycles + hindcast_cycles; }
  void validate() const;
};

/// Truth states for cycles 0..total_cycles plus the climatological spread
/// measured on the trajectory.
struct TruthRun {
  std::vector<StateVector> states;
  double climatological_std = 0.0;
};

/// Spun-up truth trajectory; states[c] is the truth at cycle c.
TruthRun run_truth(const ExperimentManifest& manifest);

/// Pooled standard deviation about per-point time means.
double climatological_std(const std::vector<StateVector>& states);

/// Observation source for a cycle; the default generates from the truth with
/// the manifest's derived observation seed. Overridable for leakage and
/// divergence experiments.
using ObsProvider = std::function<ObservationSet(int cycle)>;
ObsProvider make_obs_provider(const ExperimentManifest& manifest,
                              const ObservationNetwork& net, const TruthRun& truth);

/// Initial ensemble: truth at cycle 0 plus seeded Gaussian perturbations.
Ensemble make_initial_ensemble(const ExperimentManifest& manifest,
                               const StateVector& truth0);

/// Archive of the LETKF training period.
struct LetkfPeriod {
  std::vector<CycleRecord> records;      // cycles 1..training_cycles
  Ensemble final_ensemble;               // analysis ensemble at the last cycle
  std::vector<double> analysis_rmse;     // per cycle, vs truth
  std::vector<double> forecast_rmse;
};

/// Intermittent cycle: forecast every member one cycle, analyze with that
/// cycle's observations, repeat. Throws NumericalError if the analysis RMSE
/// stays above 10x the climatological std for 20 consecutive cycles.
LetkfPeriod run_letkf_period(const ExperimentManifest& manifest, const TruthRun& truth,
                             const ObsProvider& obs_provider, int threads = 1);

/// One row of the hindcast comparison report.
struct CycleReportRow {
  int cycle = 0;
  std::string method;        // "letkf" | "nn"
  double rmse_analysis = 0.0;
  double rmse_forecast = 0.0;
  double mean_abs_diff = 0.0;  // |nn - letkf| analysis at (pseudo-)observed points
  double analysis_seconds = 0.0;
  double cycle_seconds = 0.0;
  int obs_count = 0;
};

/// Optional per-cycle sink for the raw analysis fields (the comparison
/// pointer is null when no LETKF cycle runs).
using AnalysisSink =
    std::function<void(int cycle, const StateVector& nn, const StateVector* letkf)>;

/// NN hindcast: nn_analysis feeds a single-model forecast into the next
/// cycle. When the manifest asks for it, an independent LETKF cycle runs on
/// the same observations for comparison.
std::vector<CycleReportRow> run_nn_period(const ExperimentManifest& manifest,
                                          const EmulatorSet& emulator,
                                          const StateVector& start_state,
                                          const std::optional<Ensemble>& compare_start,
                                          const TruthRun& truth,
                                          const ObservationNetwork& net,
                                          const ObsProvider& obs_provider,
                                          int threads = 1,
                                          const AnalysisSink& sink = {});

/// Root mean square difference over the masked points (all points if the
/// mask is empty).
double rmse(const StateVector& a, const StateVector& b,
            const std::vector<int>& mask = {});

/// Free model run (no assimilation) from the given state; per-cycle RMSE vs
/// truth over the same cycle range as the truth run.
std::vector<double> run_free(const ExperimentManifest& manifest, const TruthRun& truth,
                             const StateVector& start);

/// Per-method wall-clock totals mirroring the hindcast comparison:
/// analysis / ensemble forecast / single-model forecast / total.
struct MethodTiming {
  std::string method;
  int cycles = 0;
  double analysis_total = 0.0;
  double analysis_mean = 0.0;
  double ensemble_total = 0.0;      // member forecasts (letkf only)
  double single_model_total = 0.0;  // deterministic forecast (nn only)
  double cycle_total = 0.0;
};

struct TimingSummary {
  std::vector<MethodTiming> methods;
  std::optional<double> analysis_speedup;  // letkf / nn, present with both methods
  std::optional<double> cycle_speedup;
  int warmup_cycles_excluded = 1;
};

/// Aggregates report rows; the first hindcast cycle per method is excluded
/// as warm-up. Speedups appear only when both methods were timed.
TimingSummary timing_report(const std::vector<CycleReportRow>& rows);

std::string timing_summary_text(const TimingSummary& summary);

// Report CSV: header
// cycle,method,rmse_analysis,rmse_forecast,mean_abs_diff,analysis_seconds,cycle_seconds,obs_count
void save_report_csv(const std::vector<CycleReportRow>& rows, const std::filesystem::path& path);
std::vector<CycleReportRow> load_report_csv(const std::filesystem::path& path);

}  // namespace emukf
