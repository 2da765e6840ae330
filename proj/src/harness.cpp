#include "emukf/harness.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include "emukf/errors.hpp"
#include "emukf/parallel.hpp"
#include "emukf/rng.hpp"

namespace emukf {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

StateVector initial_condition(const ModelSpec& spec) {
  StateVector x;
  x.time_index = 0;
  if (spec.kind == ModelKind::lorenz96) {
    x.values.assign(static_cast<std::size_t>(spec.dimension), spec.forcing);
    x.values[static_cast<std::size_t>(spec.dimension / 2)] += 0.01;
  } else {
    x.values = {1.0, 1.0, 1.05};
  }
  return x;
}

}  // namespace

void ExperimentManifest::validate() const {
  model.validate();
  letkf.validate();
  pseudo.validate();
  train.validate();
  if (!(obs_density > 0.0) || obs_density > 1.0) throw ConfigError("obs_density must be in (0, 1]");
  if (!(obs_sigma > 0.0)) throw ConfigError("obs_sigma must be > 0");
  if (ensemble_size < 2) throw ConfigError("ensemble_size must be >= 2");
  if (!(ensemble_init_spread > 0.0)) throw ConfigError("ensemble_init_spread must be > 0");
  if (n_regions < 1 || n_regions > model.dimension) {
    throw ConfigError("n_regions must be in [1, model dimension]");
  }
  if (n_variables != 1) {
    throw ConfigError("the surrogate provides one variable class; variables must be 1");
  }
  if (mlp_hidden < 1) throw ConfigError("mlp_hidden must be >= 1");
  if (!(mlp_activation_slope > 0.0)) throw ConfigError("mlp_activation_slope must be > 0");
  if (spin_up_cycles < 0) throw ConfigError("spin_up_cycles must be >= 0");
  if (training_cycles < 1) throw ConfigError("training_cycles must be >= 1");
  if (hindcast_cycles < 1) throw ConfigError("hindcast_cycles must be >= 1");
}

double climatological_std(const std::vector<StateVector>& states) {
  if (states.empty()) throw ValidationError("climatological_std: no states");
  const int n = states.front().dimension();
  const double t = static_cast<double>(states.size());
  std::vector<double> mean(static_cast<std::size_t>(n), 0.0);
  for (const auto& s : states) {
    for (int i = 0; i < n; ++i) mean[static_cast<std::size_t>(i)] += s.values[static_cast<std::size_t>(i)];
  }
  for (auto& m : mean) m /= t;
  double ss = 0.0;
  for (const auto& s : states) {
    for (int i = 0; i < n; ++i) {
      const double d = s.values[static_cast<std::size_t>(i)] - mean[static_cast<std::size_t>(i)];
      ss += d * d;
    }
  }
  return std::sqrt(ss / (t * static_cast<double>(n)));
}

TruthRun run_truth(const ExperimentManifest& manifest) {
  manifest.validate();
  StateVector x = initial_condition(manifest.model);
  try {
    x = integrate(manifest.model, x, manifest.spin_up_cycles * manifest.model.steps_per_cycle);
  } catch (const NumericalError& ex) {
    throw NumericalError(std::string("truth spin-up aborted: ") + ex.what());
  }
  x.time_index = 0;  // cycle counter restarts once spin-up is discarded

  TruthRun truth;
  truth.states.reserve(static_cast<std::size_t>(manifest.total_cycles()) + 1);
  truth.states.push_back(x);
  for (int c = 1; c <= manifest.total_cycles(); ++c) {
    try {
      x = advance_cycle(manifest.model, x);
    } catch (const NumericalError& ex) {
      throw NumericalError("truth run aborted at cycle " + std::to_string(c) + ": " + ex.what());
    }
    truth.states.push_back(x);
  }
  truth.climatological_std = climatological_std(truth.states);
  return truth;
}

ObsProvider make_obs_provider(const ExperimentManifest& manifest,
                              const ObservationNetwork& net, const TruthRun& truth) {
  const std::uint64_t obs_seed = derive_seed(manifest.seed, RngStream::kObsNoise);
  return [&net, &truth, obs_seed](int cycle) {
    return generate_observations(truth.states.at(static_cast<std::size_t>(cycle)), net,
                                 cycle, obs_seed);
  };
}

Ensemble make_initial_ensemble(const ExperimentManifest& manifest,
                               const StateVector& truth0) {
  const std::uint64_t init_seed = derive_seed(manifest.seed, RngStream::kEnsembleInit);
  Ensemble e;
  e.members.resize(static_cast<std::size_t>(manifest.ensemble_size));
  for (int m = 0; m < manifest.ensemble_size; ++m) {
    StateVector member = truth0;
    for (int i = 0; i < member.dimension(); ++i) {
      member.values[static_cast<std::size_t>(i)] +=
          manifest.ensemble_init_spread *
          counter_normal(init_seed, RngStream::kEnsembleInit,
                         static_cast<std::uint64_t>(m), static_cast<std::uint64_t>(i));
    }
    e.members[static_cast<std::size_t>(m)] = std::move(member);
  }
  return e;
}

namespace {

Ensemble forecast_ensemble(const ModelSpec& spec, const Ensemble& analysis, int threads) {
  Ensemble out = analysis;
  parallel_for(out.size(), threads, [&](int m) {
    out.members[static_cast<std::size_t>(m)] =
        advance_cycle(spec, out.members[static_cast<std::size_t>(m)]);
  });
  return out;
}

}  // namespace

LetkfPeriod run_letkf_period(const ExperimentManifest& manifest, const TruthRun& truth,
                             const ObsProvider& obs_provider, int threads) {
  manifest.validate();
  if (static_cast<int>(truth.states.size()) < manifest.training_cycles + 1) {
    throw ConfigError("run_letkf_period: truth run shorter than the training window");
  }
  LetkfConfig cfg = manifest.letkf;
  cfg.obs_error_std = manifest.obs_sigma;
  const std::uint64_t inflation_seed = derive_seed(manifest.seed, RngStream::kAdditiveInflation);
  const double divergence_level = 10.0 * truth.climatological_std;

  LetkfPeriod period;
  Ensemble ensemble = make_initial_ensemble(manifest, truth.states.front());
  int consecutive_diverged = 0;
  for (int c = 1; c <= manifest.training_cycles; ++c) {
    const Ensemble forecast = forecast_ensemble(manifest.model, ensemble, threads);
    const ObservationSet obs = obs_provider(c);
    const AnalysisProduct product = letkf_analysis(forecast, obs, cfg, inflation_seed, c, threads);
    ensemble = product.analysis_ensemble;

    CycleRecord rec;
    rec.cycle = c;
    rec.forecast_mean = product.forecast_mean;
    rec.analysis_mean = product.analysis_mean;
    rec.obs = obs;
    period.records.push_back(std::move(rec));

    const StateVector& truth_c = truth.states[static_cast<std::size_t>(c)];
    const double rmse_a = rmse(period.records.back().analysis_mean, truth_c);
    period.analysis_rmse.push_back(rmse_a);
    period.forecast_rmse.push_back(rmse(period.records.back().forecast_mean, truth_c));

    consecutive_diverged = rmse_a > divergence_level ? consecutive_diverged + 1 : 0;
    if (consecutive_diverged >= 20) {
      throw NumericalError("letkf filter divergence: analysis RMSE above 10x climatological "
                           "std for 20 consecutive cycles, last cycle " + std::to_string(c));
    }
  }
  period.final_ensemble = std::move(ensemble);
  return period;
}

std::vector<CycleReportRow> run_nn_period(const ExperimentManifest& manifest,
                                          const EmulatorSet& emulator,
                                          const StateVector& start_state,
                                          const std::optional<Ensemble>& compare_start,
                                          const TruthRun& truth,
                                          const ObservationNetwork& net,
                                          const ObsProvider& obs_provider,
                                          int threads, const AnalysisSink& sink) {
  manifest.validate();
  emulator.validate();
  const int first = manifest.training_cycles + 1;
  const int last = manifest.training_cycles + manifest.hindcast_cycles;
  if (static_cast<int>(truth.states.size()) < last + 1) {
    throw ConfigError("run_nn_period: truth run shorter than the hindcast window");
  }
  const bool compare = manifest.compare_letkf_in_hindcast && compare_start.has_value();
  LetkfConfig cfg = manifest.letkf;
  cfg.obs_error_std = manifest.obs_sigma;
  const std::uint64_t inflation_seed = derive_seed(manifest.seed, RngStream::kAdditiveInflation);

  std::vector<CycleReportRow> rows;
  StateVector nn_state = start_state;
  Ensemble letkf_ensemble;
  if (compare) letkf_ensemble = *compare_start;

  for (int c = first; c <= last; ++c) {
    const StateVector& truth_c = truth.states[static_cast<std::size_t>(c)];
    const ObservationSet obs = obs_provider(c);
    const ObservationSet augmented = spread_observations(obs, net, emulator.pseudo_cfg);
    std::vector<int> obs_mask;
    for (const auto& e : augmented.entries) obs_mask.push_back(e.index);

    // NN cycle: single model forecast, then the emulated analysis.
    const auto nn_model_t0 = Clock::now();
    StateVector nn_forecast;
    try {
      nn_forecast = advance_cycle(manifest.model, nn_state);
    } catch (const NumericalError& ex) {
      throw NumericalError("nn hindcast aborted at cycle " + std::to_string(c) + ": " + ex.what());
    }
    const double nn_model_seconds = seconds_since(nn_model_t0);

    const auto nn_t0 = Clock::now();
    const StateVector nn_a = nn_analysis(emulator, nn_forecast, obs, net);
    const double nn_analysis_seconds = seconds_since(nn_t0);
    nn_state = nn_a;

    StateVector letkf_a;
    if (compare) {
      const auto ens_t0 = Clock::now();
      const Ensemble forecast = forecast_ensemble(manifest.model, letkf_ensemble, threads);
      const double ensemble_seconds = seconds_since(ens_t0);

      const auto an_t0 = Clock::now();
      const AnalysisProduct product = letkf_analysis(forecast, obs, cfg, inflation_seed, c, threads);
      const double analysis_seconds = seconds_since(an_t0);
      letkf_ensemble = product.analysis_ensemble;
      letkf_a = product.analysis_mean;

      CycleReportRow row;
      row.cycle = c;
      row.method = "letkf";
      row.rmse_analysis = rmse(product.analysis_mean, truth_c);
      row.rmse_forecast = rmse(product.forecast_mean, truth_c);
      row.mean_abs_diff = 0.0;
      row.analysis_seconds = analysis_seconds;
      row.cycle_seconds = ensemble_seconds + analysis_seconds;
      row.obs_count = static_cast<int>(obs.entries.size());
      rows.push_back(row);
    }

    CycleReportRow row;
    row.cycle = c;
    row.method = "nn";
    row.rmse_analysis = rmse(nn_a, truth_c);
    row.rmse_forecast = rmse(nn_forecast, truth_c);
    if (compare) {
      double acc = 0.0;
      for (int idx : obs_mask) {
        acc += std::abs(nn_a.values[static_cast<std::size_t>(idx)] -
                        letkf_a.values[static_cast<std::size_t>(idx)]);
      }
      row.mean_abs_diff = obs_mask.empty() ? 0.0 : acc / static_cast<double>(obs_mask.size());
    }
    row.analysis_seconds = nn_analysis_seconds;
    row.cycle_seconds = nn_model_seconds + nn_analysis_seconds;
    row.obs_count = static_cast<int>(augmented.entries.size());
    rows.push_back(row);

    if (sink) sink(c, nn_a, compare ? &letkf_a : nullptr);
  }
  return rows;
}

double rmse(const StateVector& a, const StateVector& b, const std::vector<int>& mask) {
  if (a.dimension() != b.dimension()) {
    throw ConfigError("rmse: dimension mismatch " + std::to_string(a.dimension()) + " vs " +
                      std::to_string(b.dimension()));
  }
  double ss = 0.0;
  std::size_t count = 0;
  if (mask.empty()) {
    for (int i = 0; i < a.dimension(); ++i) {
      const double d = a.values[static_cast<std::size_t>(i)] - b.values[static_cast<std::size_t>(i)];
      ss += d * d;
    }
    count = a.values.size();
  } else {
    for (int idx : mask) {
      if (idx < 0 || idx >= a.dimension()) throw ConfigError("rmse: mask index outside state");
      const double d = a.values[static_cast<std::size_t>(idx)] - b.values[static_cast<std::size_t>(idx)];
      ss += d * d;
    }
    count = mask.size();
  }
  if (count == 0) throw ConfigError("rmse: empty mask");
  return std::sqrt(ss / static_cast<double>(count));
}

std::vector<double> run_free(const ExperimentManifest& manifest, const TruthRun& truth,
                             const StateVector& start) {
  std::vector<double> out;
  StateVector x = start;
  for (int c = 1; c < static_cast<int>(truth.states.size()); ++c) {
    x = advance_cycle(manifest.model, x);
    out.push_back(rmse(x, truth.states[static_cast<std::size_t>(c)]));
  }
  return out;
}

TimingSummary timing_report(const std::vector<CycleReportRow>& rows) {
  if (rows.empty()) throw ConfigError("timing_report: no report rows");
  TimingSummary summary;
  for (const std::string method : {"letkf", "nn"}) {
    MethodTiming t;
    t.method = method;
    bool first_skipped = false;
    for (const auto& row : rows) {
      if (row.method != method) continue;
      if (!first_skipped) {  // warm-up cycle excluded from totals
        first_skipped = true;
        continue;
      }
      t.cycles += 1;
      t.analysis_total += row.analysis_seconds;
      t.cycle_total += row.cycle_seconds;
      const double forecast_seconds = row.cycle_seconds - row.analysis_seconds;
      if (method == "letkf") {
        t.ensemble_total += forecast_seconds;
      } else {
        t.single_model_total += forecast_seconds;
      }
    }
    if (t.cycles > 0) {
      t.analysis_mean = t.analysis_total / static_cast<double>(t.cycles);
      summary.methods.push_back(t);
    }
  }
  if (summary.methods.empty()) throw ConfigError("timing_report: no timed cycles");
  if (summary.methods.size() == 2) {
    const MethodTiming& letkf = summary.methods[0];
    const MethodTiming& nn = summary.methods[1];
    if (nn.analysis_total > 0.0) summary.analysis_speedup = letkf.analysis_total / nn.analysis_total;
    if (nn.cycle_total > 0.0) summary.cycle_speedup = letkf.cycle_total / nn.cycle_total;
  }
  return summary;
}

std::string timing_summary_text(const TimingSummary& summary) {
  std::ostringstream os;
  os << "warmup_cycles_excluded=" << summary.warmup_cycles_excluded << "\n";
  for (const auto& t : summary.methods) {
    os << "method=" << t.method << " cycles=" << t.cycles
       << " analysis_total_s=" << format_double(t.analysis_total)
       << " analysis_mean_s=" << format_double(t.analysis_mean)
       << " ensemble_total_s=" << format_double(t.ensemble_total)
       << " single_model_total_s=" << format_double(t.single_model_total)
       << " cycle_total_s=" << format_double(t.cycle_total) << "\n";
  }
  if (summary.analysis_speedup) {
    os << "speedup_analysis=" << format_double(*summary.analysis_speedup) << "\n";
  }
  if (summary.cycle_speedup) {
    os << "speedup_cycle=" << format_double(*summary.cycle_speedup) << "\n";
  }
  return os.str();
}

void save_report_csv(const std::vector<CycleReportRow>& rows, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot open for writing: " + path.string());
  os << "cycle,method,rmse_analysis,rmse_forecast,mean_abs_diff,analysis_seconds,"
        "cycle_seconds,obs_count\n";
  for (const auto& r : rows) {
    os << r.cycle << "," << r.method << "," << format_double(r.rmse_analysis) << ","
       << format_double(r.rmse_forecast) << "," << format_double(r.mean_abs_diff) << ","
       << format_double(r.analysis_seconds) << "," << format_double(r.cycle_seconds) << ","
       << r.obs_count << "\n";
  }
  if (!os) throw IoError("write failed: " + path.string());
}

std::vector<CycleReportRow> load_report_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open for reading: " + path.string());
  std::string line;
  if (!std::getline(is, line) ||
      line != "cycle,method,rmse_analysis,rmse_forecast,mean_abs_diff,analysis_seconds,"
              "cycle_seconds,obs_count") {
    throw IoError("bad report CSV header in " + path.string());
  }
  std::vector<CycleReportRow> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string field;
    CycleReportRow r;
    std::getline(row, field, ',');
    r.cycle = std::stoi(field);
    std::getline(row, r.method, ',');
    std::getline(row, field, ',');
    r.rmse_analysis = std::strtod(field.c_str(), nullptr);
    std::getline(row, field, ',');
    r.rmse_forecast = std::strtod(field.c_str(), nullptr);
    std::getline(row, field, ',');
    r.mean_abs_diff = std::strtod(field.c_str(), nullptr);
    std::getline(row, field, ',');
    r.analysis_seconds = std::strtod(field.c_str(), nullptr);
    std::getline(row, field, ',');
    r.cycle_seconds = std::strtod(field.c_str(), nullptr);
    if (!std::getline(row, field)) throw IoError("malformed report row in " + path.string());
    r.obs_count = std::stoi(field);
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace emukf
