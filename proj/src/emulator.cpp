#include "emukf/emulator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <string>

#include <nlohmann/json.hpp>

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

void RegionPartition::validate() const {
  if (grid_size <= 0) throw ConfigError("partition grid_size must be positive");
  if (n_regions < 1 || n_regions > grid_size) {
    throw ConfigError("partition needs 1 <= regions <= grid_size, got " +
                      std::to_string(n_regions) + " regions for " +
                      std::to_string(grid_size) + " points");
  }
}

int RegionPartition::region_of(int index) const {
  validate();
  if (index < 0 || index >= grid_size) {
    throw ConfigError("region_of: index " + std::to_string(index) + " outside grid");
  }
  return static_cast<int>((static_cast<long long>(index) * n_regions) / grid_size);
}

std::vector<int> RegionPartition::indices_of(int region) const {
  validate();
  if (region < 0 || region >= n_regions) {
    throw ConfigError("indices_of: region " + std::to_string(region) + " out of range");
  }
  std::vector<int> out;
  for (int i = 0; i < grid_size; ++i) {
    if (region_of(i) == region) out.push_back(i);
  }
  return out;
}

RegionPartition make_partition(int grid_size, int n_regions) {
  RegionPartition p{grid_size, n_regions};
  p.validate();
  return p;
}

void PseudoObsConfig::validate() const {
  if (layers < 0) throw ConfigError("pseudo-obs layers must be >= 0");
  if (neighbor_count != 2) {
    throw ConfigError("pseudo-obs neighbor_count must be 2 on the ring grid, got " +
                      std::to_string(neighbor_count));
  }
}

ObservationSet spread_observations(const ObservationSet& obs,
                                   const ObservationNetwork& net,
                                   const PseudoObsConfig& cfg) {
  cfg.validate();
  net.validate();
  const int n = net.grid_size;
  ObservationSet out = obs;
  if (cfg.layers == 0) return out;

  // Only real observations act as sources; pseudo-values never cascade.
  std::map<int, double> sources;
  for (const auto& e : obs.entries) {
    if (e.index < 0 || e.index >= n) {
      throw ConfigError("spread_observations: entry index outside grid");
    }
    if (!e.pseudo) sources[e.index] = e.value;
  }
  if (sources.empty() || static_cast<int>(sources.size()) == n) return out;

  const int C = cfg.neighbor_count;
  for (int p = 0; p < n; ++p) {
    if (sources.count(p)) continue;

    int nearest = -1;
    int nearest_dist = n;
    for (const auto& [idx, value] : sources) {
      (void)value;
      const int d = cyclic_distance(idx, p, n);
      if (d < nearest_dist || (d == nearest_dist && idx < nearest)) {
        nearest_dist = d;
        nearest = idx;
      }
    }
    if (nearest_dist > cfg.layers) continue;

    // gamma counts the neighbor directions holding a real observation.
    const int left = (p - 1 + n) % n;
    const int right = (p + 1) % n;
    const bool left_obs = sources.count(left) > 0;
    const bool right_obs = sources.count(right) > 0;
    const int gamma = (left_obs ? 1 : 0) + (right_obs ? 1 : 0);
    if (gamma == C) continue;  // fully surrounded: no influence

    const double r2_near = static_cast<double>(nearest_dist) * static_cast<double>(nearest_dist);
    if (!(r2_near > 0.0)) {
      throw StateError("spread_observations: zero distance to source at point " +
                       std::to_string(p));
    }
    double sum = sources.at(nearest) / ((C - gamma) * r2_near);
    double weight = 1.0 / ((C - gamma) * r2_near);
    if (left_obs) {
      sum += sources.at(left);  // r^2 = 1 for an adjacent source
      weight += 1.0;
    }
    if (right_obs) {
      sum += sources.at(right);
      weight += 1.0;
    }
    const double value = cfg.normalize_weights ? sum / weight : sum;
    out.entries.push_back(ObsEntry{p, value, true});
  }

  std::stable_sort(out.entries.begin(), out.entries.end(),
                   [](const ObsEntry& a, const ObsEntry& b) { return a.index < b.index; });
  return out;
}

std::vector<TrainingSet> harvest_training_data(const std::vector<CycleRecord>& archive,
                                               const ObservationNetwork& net,
                                               const RegionPartition& partition,
                                               const PseudoObsConfig& pseudo_cfg) {
  partition.validate();
  if (archive.empty()) throw ConfigError("harvest: empty cycle archive");

  std::vector<HarvestedSamples> raw(static_cast<std::size_t>(partition.n_regions));
  for (const auto& rec : archive) {
    if (rec.forecast_mean.dimension() != partition.grid_size ||
        rec.analysis_mean.dimension() != partition.grid_size) {
      throw ConfigError("harvest: cycle " + std::to_string(rec.cycle) +
                        " fields do not match the grid");
    }
    const ObservationSet aug = spread_observations(rec.obs, net, pseudo_cfg);
    for (const auto& e : aug.entries) {
      const std::size_t region = static_cast<std::size_t>(partition.region_of(e.index));
      raw[region].obs_values.push_back(e.value);
      raw[region].forecast_values.push_back(rec.forecast_mean.values[static_cast<std::size_t>(e.index)]);
      raw[region].target_values.push_back(rec.analysis_mean.values[static_cast<std::size_t>(e.index)]);
    }
  }

  for (int r = 0; r < partition.n_regions; ++r) {
    if (raw[static_cast<std::size_t>(r)].obs_values.empty()) {
      throw ConfigError("harvest: no training samples for region " + std::to_string(r));
    }
  }
  std::vector<TrainingSet> sets(static_cast<std::size_t>(partition.n_regions));
  for (int r = 0; r < partition.n_regions; ++r) {
    const auto& h = raw[static_cast<std::size_t>(r)];
    TrainingSet& ts = sets[static_cast<std::size_t>(r)];
    ts.input_scaling[0] = fit_scaling(h.obs_values);
    ts.input_scaling[1] = fit_scaling(h.forecast_values);
    ts.target_scaling = fit_scaling(h.target_values);
    ts.inputs.resize(h.obs_values.size());
    ts.targets.resize(h.obs_values.size());
    for (std::size_t i = 0; i < h.obs_values.size(); ++i) {
      ts.inputs[i][0] = normalize(h.obs_values[i], ts.input_scaling[0]);
      ts.inputs[i][1] = normalize(h.forecast_values[i], ts.input_scaling[1]);
      ts.targets[i] = normalize(h.target_values[i], ts.target_scaling);
    }
  }
  return sets;
}

EmulatorEntry& EmulatorSet::at(int region, int variable) {
  return entries.at(static_cast<std::size_t>(region * n_variables + variable));
}

const EmulatorEntry& EmulatorSet::at(int region, int variable) const {
  return entries.at(static_cast<std::size_t>(region * n_variables + variable));
}

void EmulatorSet::validate() const {
  partition.validate();
  pseudo_cfg.validate();
  if (n_variables < 1) throw ConfigError("emulator needs n_variables >= 1");
  if (entries.size() != static_cast<std::size_t>(partition.n_regions) *
                            static_cast<std::size_t>(n_variables)) {
    throw ConfigError("emulator network count must be regions x variables");
  }
}

EmulatorSet make_emulator(const RegionPartition& partition,
                          const PseudoObsConfig& pseudo_cfg, int n_variables,
                          std::uint64_t init_seed, int n_hidden,
                          double activation_slope) {
  EmulatorSet emu;
  emu.partition = partition;
  emu.pseudo_cfg = pseudo_cfg;
  emu.n_variables = n_variables;
  const int count = partition.n_regions * n_variables;
  emu.entries.resize(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    EmulatorEntry& e = emu.entries[static_cast<std::size_t>(i)];
    e.mlp.net = make_random_mlp(mix64(init_seed ^ (0xC2B2AE3D27D4EB4Full * (static_cast<std::uint64_t>(i) + 1))),
                                2, n_hidden, activation_slope);
  }
  emu.validate();
  return emu;
}

void train_emulator(EmulatorSet& emu, const std::vector<TrainingSet>& per_region,
                    const TrainConfig& cfg, int threads) {
  emu.validate();
  cfg.validate();
  if (emu.n_variables != 1) {
    throw ConfigError("train_emulator: the surrogate provides one variable class, "
                      "configure variables = 1");
  }
  if (per_region.size() != static_cast<std::size_t>(emu.partition.n_regions)) {
    throw ConfigError("train_emulator: need one training set per region");
  }
  parallel_for(emu.partition.n_regions, threads, [&](int r) {
    EmulatorEntry& e = emu.at(r, 0);
    TrainConfig region_cfg = cfg;
    region_cfg.shuffle_seed = mix64(cfg.shuffle_seed ^ static_cast<std::uint64_t>(r + 1));
    const TrainingSet& ts = per_region[static_cast<std::size_t>(r)];
    TrainResult result = train(e.mlp.net, ts, region_cfg);
    e.mlp.net = std::move(result.net);
    e.mlp.input_scaling = ts.input_scaling;
    e.mlp.target_scaling = ts.target_scaling;
    e.epochs_run = result.epochs_run;
    e.final_mse = result.final_mse;
    e.sample_count = ts.size();
    e.trained = true;
  });
}

StateVector nn_analysis(const EmulatorSet& emu, const StateVector& forecast_mean,
                        const ObservationSet& obs, const ObservationNetwork& net) {
  emu.validate();
  if (forecast_mean.dimension() != emu.partition.grid_size) {
    throw ConfigError("nn_analysis: forecast dimension does not match partition grid");
  }
  if (!forecast_mean.all_finite()) throw ValidationError("nn_analysis: non-finite forecast");
  for (const auto& e : emu.entries) {
    if (!e.trained) throw StateError("nn_analysis: emulator network is untrained");
  }

  const ObservationSet aug = spread_observations(obs, net, emu.pseudo_cfg);
  StateVector analysis = forecast_mean;
  std::vector<double> input(2);
  for (const auto& e : aug.entries) {
    const EmulatorEntry& ent = emu.at(emu.partition.region_of(e.index), 0);
    input[0] = normalize(e.value, ent.mlp.input_scaling[0]);
    input[1] = normalize(forecast_mean.values[static_cast<std::size_t>(e.index)],
                         ent.mlp.input_scaling[1]);
    const double z = forward(ent.mlp.net, input);
    analysis.values[static_cast<std::size_t>(e.index)] = denormalize(z, ent.mlp.target_scaling);
  }
  return analysis;
}

void save_emulator(const EmulatorSet& emu, const std::filesystem::path& dir,
                   const TrainConfig& train_cfg,
                   const EmulatorProvenance& provenance) {
  emu.validate();
  std::filesystem::create_directories(dir);
  nlohmann::json manifest;
  manifest["version"] = 1;
  manifest["grid_size"] = emu.partition.grid_size;
  manifest["regions"] = emu.partition.n_regions;
  manifest["variables"] = emu.n_variables;
  manifest["pseudo_obs"] = {{"layers", emu.pseudo_cfg.layers},
                            {"neighbor_count", emu.pseudo_cfg.neighbor_count},
                            {"normalize_weights", emu.pseudo_cfg.normalize_weights}};
  manifest["train_config"] = {{"learning_rate", train_cfg.learning_rate},
                              {"max_epochs", train_cfg.max_epochs},
                              {"error_goal", train_cfg.error_goal},
                              {"shuffle_seed", train_cfg.shuffle_seed},
                              {"batch_mode", train_cfg.batch_mode}};
  manifest["provenance"] = {{"first_cycle", provenance.first_cycle},
                            {"last_cycle", provenance.last_cycle},
                            {"seed", provenance.seed},
                            {"manifest_hash", provenance.manifest_hash}};
  nlohmann::json nets = nlohmann::json::array();
  for (int r = 0; r < emu.partition.n_regions; ++r) {
    for (int v = 0; v < emu.n_variables; ++v) {
      const EmulatorEntry& e = emu.at(r, v);
      const std::string file = "region" + std::to_string(r) + "_var" + std::to_string(v) + ".mlp";
      save_mlp(e.mlp, dir / file);
      nets.push_back({{"region", r},
                      {"variable", v},
                      {"file", file},
                      {"trained", e.trained},
                      {"epochs_run", e.epochs_run},
                      {"final_mse", e.final_mse},
                      {"samples", e.sample_count},
                      {"scaling",
                       {{"obs", {e.mlp.input_scaling[0].mean, e.mlp.input_scaling[0].std}},
                        {"forecast", {e.mlp.input_scaling[1].mean, e.mlp.input_scaling[1].std}},
                        {"target", {e.mlp.target_scaling.mean, e.mlp.target_scaling.std}}}}});
    }
  }
  manifest["networks"] = nets;
  std::ofstream os(dir / "manifest.json", std::ios::trunc);
  if (!os) throw IoError("cannot open for writing: " + (dir / "manifest.json").string());
  os << manifest.dump(2) << "\n";
  if (!os) throw IoError("write failed: " + (dir / "manifest.json").string());
}

EmulatorSet load_emulator(const std::filesystem::path& dir) {
  const std::filesystem::path manifest_path = dir / "manifest.json";
  std::ifstream is(manifest_path);
  if (!is) throw IoError("cannot open for reading: " + manifest_path.string());
  nlohmann::json manifest;
  try {
    is >> manifest;
  } catch (const nlohmann::json::exception& ex) {
    throw IoError("bad emulator manifest " + manifest_path.string() + ": " + ex.what());
  }
  if (manifest.value("version", 0) != 1) {
    throw IoError("unsupported emulator manifest version in " + manifest_path.string());
  }
  EmulatorSet emu;
  emu.partition = make_partition(manifest.at("grid_size").get<int>(),
                                 manifest.at("regions").get<int>());
  emu.n_variables = manifest.at("variables").get<int>();
  const auto& pj = manifest.at("pseudo_obs");
  emu.pseudo_cfg.layers = pj.at("layers").get<int>();
  emu.pseudo_cfg.neighbor_count = pj.at("neighbor_count").get<int>();
  emu.pseudo_cfg.normalize_weights = pj.at("normalize_weights").get<bool>();
  emu.entries.resize(static_cast<std::size_t>(emu.partition.n_regions) *
                     static_cast<std::size_t>(emu.n_variables));
  for (const auto& nj : manifest.at("networks")) {
    const int r = nj.at("region").get<int>();
    const int v = nj.at("variable").get<int>();
    EmulatorEntry& e = emu.at(r, v);
    e.mlp = load_mlp(dir / nj.at("file").get<std::string>());
    e.trained = nj.at("trained").get<bool>();
    e.epochs_run = nj.at("epochs_run").get<int>();
    e.final_mse = nj.at("final_mse").get<double>();
    e.sample_count = nj.at("samples").get<std::size_t>();
  }
  emu.validate();
  return emu;
}

}  // namespace emukf
