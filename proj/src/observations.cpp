#include "emukf/observations.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "emukf/errors.hpp"
#include "emukf/rng.hpp"

namespace emukf {

void ObservationNetwork::validate() const {
  if (grid_size <= 0) throw ConfigError("network grid_size must be positive");
  if (!(noise_std > 0.0)) throw ConfigError("network noise_std must be > 0");
  if (observed_indices.empty()) throw ConfigError("network has no stations");
  for (std::size_t i = 0; i < observed_indices.size(); ++i) {
    const int idx = observed_indices[i];
    if (idx < 0 || idx >= grid_size) {
      throw ConfigError("station index " + std::to_string(idx) + " outside grid [0, " +
                        std::to_string(grid_size) + ")");
    }
    if (i > 0 && observed_indices[i] <= observed_indices[i - 1]) {
      throw ConfigError("station indices must be sorted and unique");
    }
  }
}

std::vector<int> ObservationNetwork::active_indices(int cycle) const {
  if (schedule == ObsSchedule::every_cycle || cycle % 2 == 0) {
    return observed_indices;
  }
  // Off phase: every other station of the sorted full mask.
  std::vector<int> sub;
  for (std::size_t i = 0; i < observed_indices.size(); i += 2) {
    sub.push_back(observed_indices[i]);
  }
  return sub;
}

bool ObservationSet::has_index(int index) const {
  for (const auto& e : entries) {
    if (e.index == index) return true;
  }
  return false;
}

ObservationNetwork build_network(int n, double density, std::uint64_t seed,
                                 ObsSchedule schedule, double noise_std) {
  if (n <= 0) throw ConfigError("build_network: n must be positive");
  if (!(density > 0.0) || density > 1.0) {
    throw ConfigError("build_network: density must be in (0, 1], got " +
                      std::to_string(density));
  }
  const int count = static_cast<int>(std::ceil(density * n));
  // Seeded Fisher-Yates; the first `count` entries form the mask.
  std::vector<int> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  for (int i = 0; i < n - 1 && i < count; ++i) {
    const std::uint64_t h = counter_hash(seed, RngStream::kObsNoise, 0xA11ull,
                                         static_cast<std::uint64_t>(i));
    const int j = i + static_cast<int>(h % static_cast<std::uint64_t>(n - i));
    std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);
  }
  ObservationNetwork net;
  net.grid_size = n;
  net.noise_std = noise_std;
  net.schedule = schedule;
  net.observed_indices.assign(perm.begin(), perm.begin() + count);
  std::sort(net.observed_indices.begin(), net.observed_indices.end());
  net.validate();
  return net;
}

double observation_noise(const ObservationNetwork& net, int cycle,
                         std::uint64_t seed, int index) {
  return net.noise_std * counter_normal(seed, RngStream::kObsNoise,
                                        static_cast<std::uint64_t>(cycle),
                                        static_cast<std::uint64_t>(index));
}

ObservationSet generate_observations(const StateVector& truth,
                                     const ObservationNetwork& net, int cycle,
                                     std::uint64_t seed) {
  net.validate();
  if (truth.dimension() != net.grid_size) {
    throw ConfigError("generate_observations: truth dimension " +
                      std::to_string(truth.dimension()) + " does not match network grid " +
                      std::to_string(net.grid_size));
  }
  if (!truth.all_finite()) throw ValidationError("generate_observations: non-finite truth");
  ObservationSet obs;
  obs.cycle = cycle;
  for (int idx : net.active_indices(cycle)) {
    const double value = truth.values[static_cast<std::size_t>(idx)] +
                         observation_noise(net, cycle, seed, idx);
    obs.entries.push_back(ObsEntry{idx, value, false});
  }
  return obs;
}

std::vector<double> observe(const StateVector& x, const ObservationNetwork& net,
                            int cycle) {
  net.validate();
  if (x.dimension() != net.grid_size) {
    throw ConfigError("observe: state dimension does not match network grid");
  }
  std::vector<double> out;
  for (int idx : net.active_indices(cycle)) {
    out.push_back(x.values[static_cast<std::size_t>(idx)]);
  }
  return out;
}

void save_observation_set_csv(const ObservationSet& obs, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot open for writing: " + path.string());
  os << "cycle,index,value\n";
  for (const auto& e : obs.entries) {
    os << obs.cycle << "," << e.index << "," << format_double(e.value) << "\n";
  }
  if (!os) throw IoError("write failed: " + path.string());
}

ObservationSet load_observation_set_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open for reading: " + path.string());
  std::string line;
  if (!std::getline(is, line) || line != "cycle,index,value") {
    throw IoError("bad observation CSV header in " + path.string());
  }
  ObservationSet obs;
  bool first = true;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string cycle_s, index_s, value_s;
    if (!std::getline(row, cycle_s, ',') || !std::getline(row, index_s, ',') ||
        !std::getline(row, value_s)) {
      throw IoError("malformed observation row in " + path.string());
    }
    const int cycle = std::stoi(cycle_s);
    if (first) {
      obs.cycle = cycle;
      first = false;
    } else if (cycle != obs.cycle) {
      throw IoError("mixed cycles in observation file " + path.string());
    }
    obs.entries.push_back(ObsEntry{std::stoi(index_s), std::strtod(value_s.c_str(), nullptr), false});
  }
  return obs;
}

void save_network_csv(const ObservationNetwork& net, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot open for writing: " + path.string());
  os << "# sigma_o=" << format_double(net.noise_std) << " schedule="
     << (net.schedule == ObsSchedule::every_cycle ? "every_cycle" : "alternating")
     << " n=" << net.grid_size << "\n";
  os << "index\n";
  for (int idx : net.observed_indices) os << idx << "\n";
  if (!os) throw IoError("write failed: " + path.string());
}

ObservationNetwork load_network_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open for reading: " + path.string());
  std::string line;
  if (!std::getline(is, line) || line.rfind("# sigma_o=", 0) != 0) {
    throw IoError("bad network metadata line in " + path.string());
  }
  ObservationNetwork net;
  {
    std::istringstream meta(line.substr(2));
    std::string token;
    while (meta >> token) {
      if (token.rfind("sigma_o=", 0) == 0) {
        net.noise_std = std::strtod(token.c_str() + 8, nullptr);
      } else if (token.rfind("schedule=", 0) == 0) {
        const std::string s = token.substr(9);
        if (s == "every_cycle") net.schedule = ObsSchedule::every_cycle;
        else if (s == "alternating") net.schedule = ObsSchedule::alternating;
        else throw IoError("unknown schedule '" + s + "' in " + path.string());
      } else if (token.rfind("n=", 0) == 0) {
        net.grid_size = std::stoi(token.substr(2));
      }
    }
  }
  if (!std::getline(is, line) || line != "index") {
    throw IoError("bad network column header in " + path.string());
  }
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    net.observed_indices.push_back(std::stoi(line));
  }
  net.validate();
  return net;
}

}  // namespace emukf
