/**
 * @file emukf_main.cpp
 * @brief Command-line driver for the twin-experiment pipeline.
 *
 * Subcommands map onto the pipeline stages: truth, obs, letkf, train, nn,
 * report. Artifacts land under <out_root>/<manifest-hash>/; rerunning an
 * up-to-date stage skips unless --force is given.
 */

#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "emukf/config.hpp"
#include "emukf/errors.hpp"
#include "emukf/parallel.hpp"
#include "emukf/pipeline.hpp"

namespace {

struct CliOptions {
  std::string config_path;
  std::vector<std::string> overrides;
  std::uint64_t seed = 0;
  bool seed_given = false;
  int threads = 0;
  bool force = false;
};

emukf::Config build_config(const CliOptions& opt) {
  emukf::Config cfg;
  if (!opt.config_path.empty()) {
    cfg = emukf::load_config_file(opt.config_path);
  }
  for (const auto& assignment : opt.overrides) {
    emukf::apply_override(cfg, assignment);
  }
  if (opt.seed_given) {
    emukf::apply_override(cfg, "seed=" + std::to_string(opt.seed));
  }
  return cfg;
}

int run_stage(const std::string& name, const CliOptions& opt) {
  const emukf::Config cfg = build_config(opt);
  emukf::StageOptions stage_opt;
  stage_opt.force = opt.force;
  stage_opt.threads = opt.threads > 0 ? opt.threads : emukf::default_threads();
  const emukf::RunPaths paths = emukf::run_paths(cfg);

  emukf::StageStatus status;
  if (name == "truth") status = emukf::stage_truth(cfg, stage_opt);
  else if (name == "obs") status = emukf::stage_obs(cfg, stage_opt);
  else if (name == "letkf") status = emukf::stage_letkf(cfg, stage_opt);
  else if (name == "train") status = emukf::stage_train(cfg, stage_opt);
  else if (name == "nn") status = emukf::stage_nn(cfg, stage_opt);
  else if (name == "report") status = emukf::stage_report(cfg, stage_opt);
  else throw emukf::ConfigError("unknown stage " + name);

  std::cout << "stage=" << name
            << " status=" << (status == emukf::StageStatus::done ? "done" : "skipped")
            << " run_dir=" << paths.root.string() << "\n";
  if (status == emukf::StageStatus::skipped) {
    std::cout << "notice: artifacts are up to date; use --force to rebuild\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Neural-network emulation of an ensemble Kalman filter on a chaotic ring model"};
  app.require_subcommand(1);

  CliOptions opt;
  app.add_option("--config", opt.config_path, "Config file (key = value lines)");
  app.add_option("--seed", opt.seed, "Master seed override, propagated to all stages")
      ->each([&opt](const std::string&) { opt.seed_given = true; });
  app.add_option("--threads", opt.threads, "Worker-thread cap (default: machine parallelism)");
  app.add_flag("--force", opt.force, "Rebuild even when artifacts are up to date");
  app.add_option("--set", opt.overrides, "Config override key=value (repeatable)")
      ->take_all();

  for (const char* stage : {"truth", "obs", "letkf", "train", "nn", "report"}) {
    app.add_subcommand(stage)->fallthrough();
  }
  app.add_subcommand("pipeline", "Run every stage in order")->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  const std::string stage = app.get_subcommands().front()->get_name();
  try {
    if (stage == "pipeline") {
      for (const char* s : {"truth", "obs", "letkf", "train", "nn", "report"}) {
        const int rc = run_stage(s, opt);
        if (rc != 0) return rc;
      }
      return 0;
    }
    return run_stage(stage, opt);
  } catch (const emukf::MissingArtifactError& e) {
    std::cerr << "error code=2 stage=" << stage << " missing=" << e.missing_path << "\n";
    return 2;
  } catch (const emukf::ConfigError& e) {
    std::cerr << "error code=3 stage=" << stage << " message=\"" << e.what() << "\"\n";
    return 3;
  } catch (const emukf::ValidationError& e) {
    std::cerr << "error code=3 stage=" << stage << " message=\"" << e.what() << "\"\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error code=1 stage=" << stage << " message=\"" << e.what() << "\"\n";
    return 1;
  }
}
