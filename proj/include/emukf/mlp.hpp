#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

namespace emukf {

/// Hidden-layer activation (1 - exp(-a v)) / (1 + exp(-a v)); equals
/// tanh(a v / 2). Saturates to +-1 without overflow for large |v|.
double activation(double v, double slope);

/// Derivative of activation with respect to v: (a/2) (1 - phi^2).
double activation_derivative(double v, double slope);

/// Feed-forward perceptron with one hidden layer, tanh-family hidden
/// activation and a linear output. Defaults match the emulator use:
/// 2 inputs (observation, forecast), 11 hidden neurons, 1 output.
struct MlpNetwork {
  int n_in = 2;
  int n_hidden = 11;
  int n_out = 1;
  double activation_slope = 2.0;

  std::vector<double> w_hidden;  // n_hidden x n_in, row-major
  std::vector<double> b_hidden;  // n_hidden
  std::vector<double> w_out;     // n_out x n_hidden, row-major
  std::vector<double> b_out;     // n_out

  void validate() const;
};

/// Network with all weights and biases zero.
MlpNetwork make_zero_mlp(int n_in = 2, int n_hidden = 11, double slope = 2.0);

/// Seeded uniform [-0.5, 0.5] initialization.
MlpNetwork make_random_mlp(std::uint64_t seed, int n_in = 2, int n_hidden = 11,
                           double slope = 2.0);

/// Scalar network output for one input vector.
double forward(const MlpNetwork& net, const std::vector<double>& input);

/// Gradients of E(w) = (target - output)^2 with respect to every weight.
struct MlpGradients {
  std::vector<double> w_hidden, b_hidden, w_out, b_out;
};
MlpGradients gradients(const MlpNetwork& net, const std::vector<double>& input,
                       double target);

/// One delta-rule update w <- w - eta dE/dw. Returns the pre-update squared
/// error (target - output)^2.
double backprop_step(MlpNetwork& net, const std::vector<double>& input,
                     double target, double learning_rate);

/// Per-feature affine scaling z = (x - mean) / std.
struct FeatureScaling {
  double mean = 0.0;
  double std = 1.0;
};

double normalize(double x, const FeatureScaling& s);
double denormalize(double z, const FeatureScaling& s);

/// Mean and sample standard deviation (k-1 normalization) of the values.
/// Throws on a degenerate (zero-spread) feature.
FeatureScaling fit_scaling(const std::vector<double>& values);

/// Scaled training pairs for one network: inputs are (observation, forecast)
/// and the target is the reference analysis, all z-scored with the stored
/// parameters.
struct TrainingSet {
  std::vector<std::array<double, 2>> inputs;
  std::vector<double> targets;
  std::array<FeatureScaling, 2> input_scaling{};
  FeatureScaling target_scaling{};

  std::size_t size() const { return inputs.size(); }
};

struct TrainConfig {
  double learning_rate = 0.001;
  int max_epochs = 5000;
  double error_goal = 1e-5;
  std::uint64_t shuffle_seed = 0;
  bool batch_mode = false;  // default: per-pattern updates in shuffled order

  void validate() const;
};

struct TrainResult {
  MlpNetwork net;
  int epochs_run = 0;
  double final_mse = 0.0;
};

/// Trains until the epoch-mean squared error reaches cfg.error_goal or
/// cfg.max_epochs epochs have run, whichever comes first. One epoch is a
/// single pass over the whole set. Deterministic for a fixed shuffle seed.
TrainResult train(MlpNetwork net, const TrainingSet& ts, const TrainConfig& cfg);

/// Network plus the scaling of its inputs and target, the unit the emulator
/// stores per (region, variable).
struct ScaledMlp {
  MlpNetwork net;
  std::array<FeatureScaling, 2> input_scaling{};
  FeatureScaling target_scaling{};
};

// Versioned flat weight file: header (magic, version, n_in, n_hidden, n_out),
// activation slope, row-major weights, then the scaling parameters.
void save_mlp(const ScaledMlp& m, const std::filesystem::path& path);
ScaledMlp load_mlp(const std::filesystem::path& path);

}  // namespace emukf
