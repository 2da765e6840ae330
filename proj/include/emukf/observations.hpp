#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "emukf/state.hpp"

namespace emukf {

/// Observation cadence. "alternating" keeps the full mask on even cycles and
/// a reduced sub-mask on odd cycles (every other station of the sorted mask),
/// mimicking a full-network / surface-only alternation.
enum class ObsSchedule { every_cycle, alternating };

/// Synthetic station network on the ring.
struct ObservationNetwork {
  std::vector<int> observed_indices;  // sorted, unique, in [0, n)
  double noise_std = 1.0;             // sigma_o, per variable
  ObsSchedule schedule = ObsSchedule::every_cycle;
  int grid_size = 0;                  // n

  /// Stations active at the given cycle under the schedule.
  std::vector<int> active_indices(int cycle) const;
  void validate() const;
};

struct ObsEntry {
  int index = 0;
  double value = 0.0;
  bool pseudo = false;  // set by pseudo-observation spreading, never persisted as distinct
};

/// Observations for one cycle.
struct ObservationSet {
  int cycle = 0;
  std::vector<ObsEntry> entries;
  std::string network_ref;

  bool has_index(int index) const;
};

/// Samples ceil(density * n) station indices uniformly without replacement.
/// Deterministic for a fixed seed.
ObservationNetwork build_network(int n, double density, std::uint64_t seed,
                                 ObsSchedule schedule = ObsSchedule::every_cycle,
                                 double noise_std = 1.0);

/// Noisy observations of the truth at the cycle's active stations. Noise is
/// drawn from a counter generator keyed by (seed, cycle, index), so values do
/// not depend on evaluation order.
ObservationSet generate_observations(const StateVector& truth,
                                     const ObservationNetwork& net, int cycle,
                                     std::uint64_t seed);

/// The exact noise draw used for (seed, cycle, index); test/restart hook.
double observation_noise(const ObservationNetwork& net, int cycle,
                         std::uint64_t seed, int index);

/// Linear observation operator: state restricted to the cycle's active mask.
std::vector<double> observe(const StateVector& x, const ObservationNetwork& net,
                            int cycle);

// CSV persistence. Observation sets use header "cycle,index,value"; the
// network file is a single "index" column preceded by a metadata line.
void save_observation_set_csv(const ObservationSet& obs, const std::filesystem::path& path);
ObservationSet load_observation_set_csv(const std::filesystem::path& path);
void save_network_csv(const ObservationNetwork& net, const std::filesystem::path& path);
ObservationNetwork load_network_csv(const std::filesystem::path& path);

}  // namespace emukf
