#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "emukf/mlp.hpp"
#include "emukf/observations.hpp"
#include "emukf/state.hpp"

namespace emukf {

/// Contiguous split of the ring into region segments.
struct RegionPartition {
  int grid_size = 0;
  int n_regions = 6;

  int region_of(int index) const;
  std::vector<int> indices_of(int region) const;
  void validate() const;
};

RegionPartition make_partition(int grid_size, int n_regions);

/// Pseudo-observation spreading parameters. neighbor_count is 2d for a
/// d-dimensional grid; on the ring it is 2. With normalize_weights the raw
/// spreading sum is divided by the total applied weight so pseudo-values are
/// weighted averages of the contributing observations; the raw formula stays
/// available for fidelity studies.
struct PseudoObsConfig {
  int layers = 2;           // M
  int neighbor_count = 2;   // C = 2d
  bool normalize_weights = true;

  void validate() const;
};

/// Spreads observations to unobserved grid points within `layers` cyclic
/// steps of a real observation. A point with a real observation passes
/// through unchanged; a point whose full neighborhood is observed (gamma = C)
/// receives nothing. Only real observations act as sources.
ObservationSet spread_observations(const ObservationSet& obs,
                                   const ObservationNetwork& net,
                                   const PseudoObsConfig& cfg);

/// One assimilation cycle archived for training.
struct CycleRecord {
  int cycle = 0;
  StateVector forecast_mean;
  StateVector analysis_mean;
  ObservationSet obs;
};

/// Training pairs routed per (region, variable), before scaling.
struct HarvestedSamples {
  std::vector<double> obs_values;
  std::vector<double> forecast_values;
  std::vector<double> target_values;
};

/// Builds per-region scaled training sets from an archive of LETKF cycles:
/// one sample per (cycle, grid point with a real or pseudo observation),
/// input = (obs value, forecast mean), target = analysis mean. Scaling is
/// fitted on the harvested samples of each region. Throws if any region
/// harvests nothing.
std::vector<TrainingSet> harvest_training_data(const std::vector<CycleRecord>& archive,
                                               const ObservationNetwork& net,
                                               const RegionPartition& partition,
                                               const PseudoObsConfig& pseudo_cfg);

/// Per-(region, variable) network metadata kept with the emulator.
struct EmulatorEntry {
  ScaledMlp mlp;
  bool trained = false;
  int epochs_run = 0;
  double final_mse = 0.0;
  std::size_t sample_count = 0;
};

/// The trained analysis function: one network per (region, variable).
struct EmulatorSet {
  RegionPartition partition;
  PseudoObsConfig pseudo_cfg;
  int n_variables = 1;
  std::vector<EmulatorEntry> entries;  // region-major: entries[r * n_variables + v]

  EmulatorEntry& at(int region, int variable = 0);
  const EmulatorEntry& at(int region, int variable = 0) const;
  void validate() const;
};

EmulatorSet make_emulator(const RegionPartition& partition,
                          const PseudoObsConfig& pseudo_cfg, int n_variables,
                          std::uint64_t init_seed, int n_hidden = 11,
                          double activation_slope = 2.0);

/// Trains every network of the set on its region's training data.
/// Distinct networks may train on separate threads.
void train_emulator(EmulatorSet& emu, const std::vector<TrainingSet>& per_region,
                    const TrainConfig& cfg, int threads = 1);

/// The emulated analysis: at every grid point holding a real or pseudo
/// observation, the regional network maps (obs, forecast) to the analysis
/// value; all other points keep the forecast bit-exactly.
StateVector nn_analysis(const EmulatorSet& emu, const StateVector& forecast_mean,
                        const ObservationSet& obs, const ObservationNetwork& net);

/// Provenance recorded in the emulator directory manifest.
struct EmulatorProvenance {
  int first_cycle = 0;
  int last_cycle = 0;
  std::uint64_t seed = 0;
  std::string manifest_hash;
};

// Directory persistence: one weight file per (region, variable) plus a JSON
// manifest with partition, pseudo-obs config, scaling and training provenance.
void save_emulator(const EmulatorSet& emu, const std::filesystem::path& dir,
                   const TrainConfig& train_cfg,
                   const EmulatorProvenance& provenance);
EmulatorSet load_emulator(const std::filesystem::path& dir);

}  // namespace emukf
