#pragma once

#include <filesystem>
#include <string>

#include "emukf/config.hpp"

namespace emukf {

/// Stage directory layout under <out_root>/<manifest-hash>/.
struct RunPaths {
  std::filesystem::path root;

  std::filesystem::path manifest_copy() const { return root / "manifest.cfg"; }
  std::filesystem::path truth_dir() const { return root / "truth"; }
  std::filesystem::path obs_dir() const { return root / "obs"; }
  std::filesystem::path letkf_dir() const { return root / "letkf"; }
  std::filesystem::path train_dir() const { return root / "train"; }
  std::filesystem::path nn_dir() const { return root / "nn"; }
  std::filesystem::path report_dir() const { return root / "report"; }

  std::filesystem::path truth_state(int cycle) const;
  std::filesystem::path truth_meta() const { return truth_dir() / "meta.csv"; }
  std::filesystem::path network_file() const { return obs_dir() / "network.csv"; }
  std::filesystem::path obs_cycle(int cycle) const;
  std::filesystem::path forecast_mean(int cycle) const;
  std::filesystem::path analysis_mean(int cycle) const;
  std::filesystem::path final_member(int member) const;
  std::filesystem::path letkf_rmse() const { return letkf_dir() / "rmse.csv"; }
  std::filesystem::path nn_report() const { return nn_dir() / "report.csv"; }
  std::filesystem::path nn_analysis_dump(int cycle) const;
  std::filesystem::path letkf_hindcast_dump(int cycle) const;
  std::filesystem::path summary_file() const { return report_dir() / "summary.txt"; }
};

RunPaths run_paths(const Config& cfg);

struct StageOptions {
  bool force = false;
  int threads = 1;
};

enum class StageStatus { done, skipped };

// Pipeline stages. Each writes its artifacts under the run directory and a
// completion marker; rerunning an up-to-date stage skips unless forced.
// Missing prerequisites raise MissingArtifactError.
StageStatus stage_truth(const Config& cfg, const StageOptions& opt);
StageStatus stage_obs(const Config& cfg, const StageOptions& opt);
StageStatus stage_letkf(const Config& cfg, const StageOptions& opt);
StageStatus stage_train(const Config& cfg, const StageOptions& opt);
StageStatus stage_nn(const Config& cfg, const StageOptions& opt);
StageStatus stage_report(const Config& cfg, const StageOptions& opt);

/// Runs every stage in order.
void run_pipeline(const Config& cfg, const StageOptions& opt);

// Artifact loaders used across stages.
TruthRun load_truth_artifacts(const Config& cfg, const RunPaths& paths);
std::vector<CycleRecord> load_letkf_archive(const Config& cfg, const RunPaths& paths);
Ensemble load_final_ensemble(const Config& cfg, const RunPaths& paths);
ObsProvider make_file_obs_provider(const RunPaths& paths);

}  // namespace emukf
