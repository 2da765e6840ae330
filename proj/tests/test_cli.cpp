// End-to-end checks of the command-line driver. Invoked by ctest with the
// binary path as the only argument; exercises stage ordering, exit codes,
// idempotent reruns and the full small-scale pipeline.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "emukf/harness.hpp"

namespace fs = std::filesystem;

namespace {

int failures = 0;

void check(bool ok, const std::string& what) {
  if (ok) {
    std::cout << "ok: " << what << "\n";
  } else {
    ++failures;
    std::cout << "FAILED: " << what << "\n";
  }
}

struct CommandResult {
  int exit_code = -1;
  std::string output;
};

CommandResult run_command(const std::string& cmd) {
  const std::string full = cmd + " 2>&1";
  FILE* pipe = popen(full.c_str(), "r");
  CommandResult result;
  if (!pipe) return result;
  char buf[4096];
  while (std::size_t got = std::fread(buf, 1, sizeof(buf), pipe)) {
    result.output.append(buf, got);
  }
  const int status = pclose(pipe);
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return result;
}

std::size_t count_files(const fs::path& dir, const std::string& extension) {
  if (!fs::exists(dir)) return 0;
  std::size_t n = 0;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.path().extension() == extension) ++n;
  }
  return n;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << "usage: test_cli <emukf-binary>\n";
    return 1;
  }
  const std::string bin = argv[1];
  const fs::path work = fs::temp_directory_path() / "emukf_cli_test";
  fs::remove_all(work);
  fs::create_directories(work);

  const fs::path config_path = work / "exp.cfg";
  {
    std::ofstream os(config_path);
    os << "cycles.spin_up = 100\n"
       << "cycles.training = 40\n"
       << "letkf.members = 10\n"
       << "mlp.max_epochs = 15\n"
       << "seed = 2025\n"
       << "io.out_root = " << (work / "runs").string() << "\n";
  }
  const std::string base = bin + " --config " + config_path.string() + " --threads 2 ";

  // A stage with a missing prerequisite exits 2 with the expected path.
  {
    const CommandResult r = run_command(base + "train");
    check(r.exit_code == 2, "train before letkf exits 2");
    check(r.output.find("error code=2") != std::string::npos, "exit-2 error line is machine parseable");
    check(r.output.find("missing=") != std::string::npos, "exit-2 error names the missing path");
  }

  // Invalid configuration exits 3 naming the key.
  {
    const CommandResult r = run_command(base + "truth --set obs.density=2.0");
    check(r.exit_code == 3, "invalid override exits 3");
    check(r.output.find("obs.density") != std::string::npos, "exit-3 error names the key");
  }

  // Truth stage produces one snapshot per cycle plus the initial state.
  {
    const CommandResult r = run_command(base + "truth");
    check(r.exit_code == 0, "truth stage succeeds");
    check(r.output.find("status=done") != std::string::npos, "truth reports done");
  }
  fs::path run_dir;
  for (const auto& entry : fs::directory_iterator(work / "runs")) {
    if (entry.is_directory()) run_dir = entry.path();
  }
  check(!run_dir.empty(), "run directory exists");
  check(count_files(run_dir / "truth", ".bin") == 40 + 112 + 1,
        "truth snapshot count is total cycles + 1");
  check(fs::exists(run_dir / "manifest.cfg"), "manifest copy is stored with the run");

  // Rerunning without --force skips.
  {
    const CommandResult r = run_command(base + "truth");
    check(r.exit_code == 0, "rerun exits 0");
    check(r.output.find("status=skipped") != std::string::npos, "rerun skips up-to-date stage");
    const CommandResult f = run_command(base + "truth --force");
    check(f.output.find("status=done") != std::string::npos, "--force rebuilds");
  }

  // Remaining stages in order.
  for (const char* stage : {"obs", "letkf", "train", "nn", "report"}) {
    const CommandResult r = run_command(base + stage);
    check(r.exit_code == 0, std::string("stage ") + stage + " succeeds");
  }
  check(count_files(run_dir / "obs", ".csv") == 40 + 112 + 1,  // network + per-cycle sets
        "observation files cover every cycle");

  // The hindcast report has one nn row and one letkf row per hindcast cycle.
  {
    const auto rows = emukf::load_report_csv(run_dir / "nn" / "report.csv");
    std::size_t nn_rows = 0, letkf_rows = 0;
    for (const auto& row : rows) {
      if (row.method == "nn") ++nn_rows;
      if (row.method == "letkf") ++letkf_rows;
    }
    check(nn_rows == 112, "report contains 112 nn rows");
    check(letkf_rows == 112, "report contains 112 letkf rows");
    std::ifstream summary(run_dir / "report" / "summary.txt");
    std::stringstream ss;
    ss << summary.rdbuf();
    check(ss.str().find("speedup_analysis=") != std::string::npos,
          "summary reports the analysis speedup");
  }

  // A different seed lands in a different run directory.
  {
    const CommandResult r = run_command(base + "truth --seed 777");
    check(r.exit_code == 0, "seed override accepted");
    std::size_t dirs = 0;
    for (const auto& entry : fs::directory_iterator(work / "runs")) {
      if (entry.is_directory()) ++dirs;
    }
    check(dirs == 2, "seed override produces a new manifest hash");
  }

  fs::remove_all(work);
  if (failures == 0) {
    std::cout << "all cli checks passed\n";
    return 0;
  }
  std::cout << failures << " cli check(s) failed\n";
  return 1;
}
