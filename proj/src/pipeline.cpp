#include "emukf/pipeline.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "emukf/errors.hpp"
#include "emukf/rng.hpp"

namespace emukf {

namespace {

std::string cycle_name(const char* prefix, int cycle) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s_%05d", prefix, cycle);
  return buf;
}

std::filesystem::path marker_path(const std::filesystem::path& stage_dir) {
  return stage_dir / ".done";
}

bool stage_up_to_date(const std::filesystem::path& stage_dir, const std::string& hash) {
  std::ifstream is(marker_path(stage_dir));
  if (!is) return false;
  std::string stored;
  std::getline(is, stored);
  return stored == hash;
}

void write_marker(const std::filesystem::path& stage_dir, const std::string& hash) {
  std::ofstream os(marker_path(stage_dir), std::ios::trunc);
  if (!os) throw IoError("cannot write stage marker in " + stage_dir.string());
  os << hash << "\n";
}

void require_stage(const std::filesystem::path& stage_dir, const std::string& hash) {
  if (!stage_up_to_date(stage_dir, hash)) {
    throw MissingArtifactError(marker_path(stage_dir).string());
  }
}

}  // namespace

std::filesystem::path RunPaths::truth_state(int cycle) const {
  return truth_dir() / (cycle_name("cycle", cycle) + ".bin");
}

std::filesystem::path RunPaths::obs_cycle(int cycle) const {
  return obs_dir() / (cycle_name("cycle", cycle) + ".csv");
}

std::filesystem::path RunPaths::forecast_mean(int cycle) const {
  return letkf_dir() / (cycle_name("forecast_mean", cycle) + ".bin");
}

std::filesystem::path RunPaths::analysis_mean(int cycle) const {
  return letkf_dir() / (cycle_name("analysis_mean", cycle) + ".bin");
}

std::filesystem::path RunPaths::final_member(int member) const {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "final_member_%03d.bin", member);
  return letkf_dir() / buf;
}

std::filesystem::path RunPaths::nn_analysis_dump(int cycle) const {
  return nn_dir() / (cycle_name("nn_analysis", cycle) + ".bin");
}

std::filesystem::path RunPaths::letkf_hindcast_dump(int cycle) const {
  return nn_dir() / (cycle_name("letkf_analysis", cycle) + ".bin");
}

RunPaths run_paths(const Config& cfg) {
  return RunPaths{std::filesystem::path(cfg.out_root) / manifest_hash(cfg.manifest)};
}

StageStatus stage_truth(const Config& cfg, const StageOptions& opt) {
  cfg.manifest.validate();
  const RunPaths paths = run_paths(cfg);
  const std::string hash = manifest_hash(cfg.manifest);
  if (!opt.force && stage_up_to_date(paths.truth_dir(), hash)) return StageStatus::skipped;

  std::filesystem::create_directories(paths.truth_dir());
  {
    std::ofstream os(paths.manifest_copy(), std::ios::trunc);
    if (!os) throw IoError("cannot write " + paths.manifest_copy().string());
    os << serialize_config(cfg);
  }
  const TruthRun truth = run_truth(cfg.manifest);
  for (int c = 0; c < static_cast<int>(truth.states.size()); ++c) {
    save_state_binary(truth.states[static_cast<std::size_t>(c)], paths.truth_state(c));
  }
  {
    std::ofstream os(paths.truth_meta(), std::ios::trunc);
    if (!os) throw IoError("cannot write " + paths.truth_meta().string());
    os << "total_cycles,climatological_std\n";
    os << cfg.manifest.total_cycles() << "," << format_double(truth.climatological_std) << "\n";
  }
  write_marker(paths.truth_dir(), hash);
  return StageStatus::done;
}

TruthRun load_truth_artifacts(const Config& cfg, const RunPaths& paths) {
  std::ifstream meta(paths.truth_meta());
  if (!meta) throw MissingArtifactError(paths.truth_meta().string());
  std::string line;
  std::getline(meta, line);
  if (line != "total_cycles,climatological_std") {
    throw IoError("bad truth meta header in " + paths.truth_meta().string());
  }
  std::getline(meta, line);
  const auto comma = line.find(',');
  if (comma == std::string::npos) throw IoError("bad truth meta row");
  const int total = std::stoi(line.substr(0, comma));
  TruthRun truth;
  truth.climatological_std = std::strtod(line.c_str() + comma + 1, nullptr);
  if (total != cfg.manifest.total_cycles()) {
    throw IoError("truth artifacts cover " + std::to_string(total) +
                  " cycles but the manifest expects " + std::to_string(cfg.manifest.total_cycles()));
  }
  truth.states.reserve(static_cast<std::size_t>(total) + 1);
  for (int c = 0; c <= total; ++c) {
    const auto path = paths.truth_state(c);
    if (!std::filesystem::exists(path)) throw MissingArtifactError(path.string());
    truth.states.push_back(load_state_binary(path));
  }
  return truth;
}

StageStatus stage_obs(const Config& cfg, const StageOptions& opt) {
  cfg.manifest.validate();
  const RunPaths paths = run_paths(cfg);
  const std::string hash = manifest_hash(cfg.manifest);
  if (!opt.force && stage_up_to_date(paths.obs_dir(), hash)) return StageStatus::skipped;
  require_stage(paths.truth_dir(), hash);

  const TruthRun truth = load_truth_artifacts(cfg, paths);
  std::filesystem::create_directories(paths.obs_dir());
  const ObservationNetwork net =
      build_network(cfg.manifest.model.dimension, cfg.manifest.obs_density,
                    derive_seed(cfg.manifest.seed, RngStream::kObsNoise),
                    cfg.manifest.obs_schedule, cfg.manifest.obs_sigma);
  save_network_csv(net, paths.network_file());
  const ObsProvider provider = make_obs_provider(cfg.manifest, net, truth);
  for (int c = 1; c <= cfg.manifest.total_cycles(); ++c) {
    save_observation_set_csv(provider(c), paths.obs_cycle(c));
  }
  write_marker(paths.obs_dir(), hash);
  return StageStatus::done;
}

ObsProvider make_file_obs_provider(const RunPaths& paths) {
  return [paths](int cycle) {
    const auto path = paths.obs_cycle(cycle);
    if (!std::filesystem::exists(path)) throw MissingArtifactError(path.string());
    ObservationSet obs = load_observation_set_csv(path);
    obs.cycle = cycle;
    return obs;
  };
}

StageStatus stage_letkf(const Config& cfg, const StageOptions& opt) {
  cfg.manifest.validate();
  const RunPaths paths = run_paths(cfg);
  const std::string hash = manifest_hash(cfg.manifest);
  if (!opt.force && stage_up_to_date(paths.letkf_dir(), hash)) return StageStatus::skipped;
  require_stage(paths.truth_dir(), hash);
  require_stage(paths.obs_dir(), hash);

  const TruthRun truth = load_truth_artifacts(cfg, paths);
  std::filesystem::create_directories(paths.letkf_dir());
  const LetkfPeriod period =
      run_letkf_period(cfg.manifest, truth, make_file_obs_provider(paths), opt.threads);
  for (const auto& rec : period.records) {
    save_state_binary(rec.forecast_mean, paths.forecast_mean(rec.cycle));
    save_state_binary(rec.analysis_mean, paths.analysis_mean(rec.cycle));
  }
  for (int m = 0; m < period.final_ensemble.size(); ++m) {
    save_state_binary(period.final_ensemble.members[static_cast<std::size_t>(m)],
                      paths.final_member(m));
  }
  {
    std::ofstream os(paths.letkf_rmse(), std::ios::trunc);
    if (!os) throw IoError("cannot write " + paths.letkf_rmse().string());
    os << "cycle,rmse_forecast,rmse_analysis\n";
    for (std::size_t i = 0; i < period.records.size(); ++i) {
      os << period.records[i].cycle << "," << format_double(period.forecast_rmse[i]) << ","
         << format_double(period.analysis_rmse[i]) << "\n";
    }
  }
  write_marker(paths.letkf_dir(), hash);
  return StageStatus::done;
}

std::vector<CycleRecord> load_letkf_archive(const Config& cfg, const RunPaths& paths) {
  const ObsProvider provider = make_file_obs_provider(paths);
  std::vector<CycleRecord> records;
  records.reserve(static_cast<std::size_t>(cfg.manifest.training_cycles));
  for (int c = 1; c <= cfg.manifest.training_cycles; ++c) {
    CycleRecord rec;
    rec.cycle = c;
    const auto fpath = paths.forecast_mean(c);
    const auto apath = paths.analysis_mean(c);
    if (!std::filesystem::exists(fpath)) throw MissingArtifactError(fpath.string());
    if (!std::filesystem::exists(apath)) throw MissingArtifactError(apath.string());
    rec.forecast_mean = load_state_binary(fpath);
    rec.analysis_mean = load_state_binary(apath);
    rec.obs = provider(c);
    records.push_back(std::move(rec));
  }
  return records;
}

Ensemble load_final_ensemble(const Config& cfg, const RunPaths& paths) {
  Ensemble e;
  for (int m = 0; m < cfg.manifest.ensemble_size; ++m) {
    const auto path = paths.final_member(m);
    if (!std::filesystem::exists(path)) throw MissingArtifactError(path.string());
    e.members.push_back(load_state_binary(path));
  }
  return e;
}

StageStatus stage_train(const Config& cfg, const StageOptions& opt) {
  cfg.manifest.validate();
  const RunPaths paths = run_paths(cfg);
  const std::string hash = manifest_hash(cfg.manifest);
  if (!opt.force && stage_up_to_date(paths.train_dir(), hash)) return StageStatus::skipped;
  require_stage(paths.letkf_dir(), hash);
  require_stage(paths.obs_dir(), hash);

  const ObservationNetwork net = load_network_csv(paths.network_file());
  const std::vector<CycleRecord> archive = load_letkf_archive(cfg, paths);
  const RegionPartition partition =
      make_partition(cfg.manifest.model.dimension, cfg.manifest.n_regions);
  const std::vector<TrainingSet> sets =
      harvest_training_data(archive, net, partition, cfg.manifest.pseudo);

  EmulatorSet emu = make_emulator(partition, cfg.manifest.pseudo, cfg.manifest.n_variables,
                                  derive_seed(cfg.manifest.seed, RngStream::kMlpInit),
                                  cfg.manifest.mlp_hidden, cfg.manifest.mlp_activation_slope);
  train_emulator(emu, sets, cfg.manifest.train, opt.threads);

  EmulatorProvenance provenance;
  provenance.first_cycle = 1;
  provenance.last_cycle = cfg.manifest.training_cycles;
  provenance.seed = cfg.manifest.seed;
  provenance.manifest_hash = hash;
  save_emulator(emu, paths.train_dir(), cfg.manifest.train, provenance);
  write_marker(paths.train_dir(), hash);
  return StageStatus::done;
}

StageStatus stage_nn(const Config& cfg, const StageOptions& opt) {
  cfg.manifest.validate();
  const RunPaths paths = run_paths(cfg);
  const std::string hash = manifest_hash(cfg.manifest);
  if (!opt.force && stage_up_to_date(paths.nn_dir(), hash)) return StageStatus::skipped;
  require_stage(paths.truth_dir(), hash);
  require_stage(paths.obs_dir(), hash);
  require_stage(paths.letkf_dir(), hash);
  require_stage(paths.train_dir(), hash);

  const TruthRun truth = load_truth_artifacts(cfg, paths);
  const ObservationNetwork net = load_network_csv(paths.network_file());
  const EmulatorSet emu = load_emulator(paths.train_dir());
  const StateVector start = load_state_binary(paths.analysis_mean(cfg.manifest.training_cycles));
  std::optional<Ensemble> compare_start;
  if (cfg.manifest.compare_letkf_in_hindcast) {
    compare_start = load_final_ensemble(cfg, paths);
  }

  std::filesystem::create_directories(paths.nn_dir());
  const AnalysisSink dump = [&paths](int cycle, const StateVector& nn, const StateVector* letkf) {
    save_state_binary(nn, paths.nn_analysis_dump(cycle));
    if (letkf) save_state_binary(*letkf, paths.letkf_hindcast_dump(cycle));
  };
  const std::vector<CycleReportRow> rows =
      run_nn_period(cfg.manifest, emu, start, compare_start, truth, net,
                    make_file_obs_provider(paths), opt.threads, dump);
  save_report_csv(rows, paths.nn_report());
  write_marker(paths.nn_dir(), hash);
  return StageStatus::done;
}

StageStatus stage_report(const Config& cfg, const StageOptions& opt) {
  cfg.manifest.validate();
  const RunPaths paths = run_paths(cfg);
  const std::string hash = manifest_hash(cfg.manifest);
  if (!opt.force && stage_up_to_date(paths.report_dir(), hash)) return StageStatus::skipped;
  require_stage(paths.nn_dir(), hash);

  if (!std::filesystem::exists(paths.nn_report())) {
    throw MissingArtifactError(paths.nn_report().string());
  }
  const std::vector<CycleReportRow> rows = load_report_csv(paths.nn_report());
  const TimingSummary summary = timing_report(rows);
  std::filesystem::create_directories(paths.report_dir());
  std::ofstream os(paths.summary_file(), std::ios::trunc);
  if (!os) throw IoError("cannot write " + paths.summary_file().string());
  os << timing_summary_text(summary);
  write_marker(paths.report_dir(), hash);
  return StageStatus::done;
}

void run_pipeline(const Config& cfg, const StageOptions& opt) {
  stage_truth(cfg, opt);
  stage_obs(cfg, opt);
  stage_letkf(cfg, opt);
  stage_train(cfg, opt);
  stage_nn(cfg, opt);
  stage_report(cfg, opt);
}

}  // namespace emukf
