#include "emukf/mlp.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <string>

#include "emukf/errors.hpp"
#include "emukf/rng.hpp"

namespace emukf {

double activation(double v, double slope) {
  const double z = slope * v;
  if (z >= 0.0) {
    const double e = std::exp(-z);
    return (1.0 - e) / (1.0 + e);
  }
  const double e = std::exp(z);
  return (e - 1.0) / (e + 1.0);
}

double activation_derivative(double v, double slope) {
  const double phi = activation(v, slope);
  return 0.5 * slope * (1.0 - phi * phi);
}

void MlpNetwork::validate() const {
  if (n_in < 1 || n_hidden < 1 || n_out < 1) throw ConfigError("mlp layer sizes must be >= 1");
  if (!(activation_slope > 0.0)) throw ConfigError("activation slope must be > 0");
  if (w_hidden.size() != static_cast<std::size_t>(n_hidden) * static_cast<std::size_t>(n_in) ||
      b_hidden.size() != static_cast<std::size_t>(n_hidden) ||
      w_out.size() != static_cast<std::size_t>(n_out) * static_cast<std::size_t>(n_hidden) ||
      b_out.size() != static_cast<std::size_t>(n_out)) {
    throw ConfigError("mlp weight storage does not match layer sizes");
  }
  for (double w : w_hidden) if (!std::isfinite(w)) throw ValidationError("non-finite mlp weight");
  for (double w : b_hidden) if (!std::isfinite(w)) throw ValidationError("non-finite mlp bias");
  for (double w : w_out) if (!std::isfinite(w)) throw ValidationError("non-finite mlp weight");
  for (double w : b_out) if (!std::isfinite(w)) throw ValidationError("non-finite mlp bias");
}

MlpNetwork make_zero_mlp(int n_in, int n_hidden, double slope) {
  MlpNetwork net;
  net.n_in = n_in;
  net.n_hidden = n_hidden;
  net.n_out = 1;
  net.activation_slope = slope;
  net.w_hidden.assign(static_cast<std::size_t>(n_hidden) * static_cast<std::size_t>(n_in), 0.0);
  net.b_hidden.assign(static_cast<std::size_t>(n_hidden), 0.0);
  net.w_out.assign(static_cast<std::size_t>(n_hidden), 0.0);
  net.b_out.assign(1, 0.0);
  return net;
}

MlpNetwork make_random_mlp(std::uint64_t seed, int n_in, int n_hidden, double slope) {
  MlpNetwork net = make_zero_mlp(n_in, n_hidden, slope);
  const auto draw = [seed](std::uint64_t layer, std::uint64_t i, std::uint64_t j) {
    return counter_uniform(seed, RngStream::kMlpInit, layer, i, j) - 0.5;
  };
  for (int j = 0; j < n_hidden; ++j) {
    for (int i = 0; i < n_in; ++i) {
      net.w_hidden[static_cast<std::size_t>(j * n_in + i)] =
          draw(0, static_cast<std::uint64_t>(j), static_cast<std::uint64_t>(i));
    }
    net.b_hidden[static_cast<std::size_t>(j)] = draw(1, static_cast<std::uint64_t>(j), 0);
    net.w_out[static_cast<std::size_t>(j)] = draw(2, static_cast<std::uint64_t>(j), 0);
  }
  net.b_out[0] = draw(3, 0, 0);
  return net;
}

namespace {

struct ForwardTrace {
  std::vector<double> pre_hidden;  // u_j
  std::vector<double> hidden;      // phi(u_j)
  double output = 0.0;
};

ForwardTrace forward_trace(const MlpNetwork& net, const std::vector<double>& input) {
  ForwardTrace t;
  t.pre_hidden.resize(static_cast<std::size_t>(net.n_hidden));
  t.hidden.resize(static_cast<std::size_t>(net.n_hidden));
  for (int j = 0; j < net.n_hidden; ++j) {
    double u = net.b_hidden[static_cast<std::size_t>(j)];
    for (int i = 0; i < net.n_in; ++i) {
      u += net.w_hidden[static_cast<std::size_t>(j * net.n_in + i)] * input[static_cast<std::size_t>(i)];
    }
    t.pre_hidden[static_cast<std::size_t>(j)] = u;
    t.hidden[static_cast<std::size_t>(j)] = activation(u, net.activation_slope);
  }
  double y = net.b_out[0];
  for (int j = 0; j < net.n_hidden; ++j) {
    y += net.w_out[static_cast<std::size_t>(j)] * t.hidden[static_cast<std::size_t>(j)];
  }
  t.output = y;
  return t;
}

void check_input(const MlpNetwork& net, const std::vector<double>& input) {
  if (static_cast<int>(input.size()) != net.n_in) {
    throw ConfigError("mlp input size " + std::to_string(input.size()) +
                      " does not match n_in " + std::to_string(net.n_in));
  }
  for (double v : input) {
    if (!std::isfinite(v)) throw ValidationError("non-finite mlp input");
  }
  if (net.n_out != 1) throw ConfigError("scalar mlp operations require n_out == 1");
}

}  // namespace

double forward(const MlpNetwork& net, const std::vector<double>& input) {
  net.validate();
  check_input(net, input);
  return forward_trace(net, input).output;
}

MlpGradients gradients(const MlpNetwork& net, const std::vector<double>& input,
                       double target) {
  net.validate();
  check_input(net, input);
  const ForwardTrace t = forward_trace(net, input);
  // E = (d - y)^2; the factor 2 from the square is kept in the gradient.
  const double r = -2.0 * (target - t.output);
  MlpGradients g;
  g.w_hidden.resize(net.w_hidden.size());
  g.b_hidden.resize(net.b_hidden.size());
  g.w_out.resize(net.w_out.size());
  g.b_out.resize(net.b_out.size());
  g.b_out[0] = r;
  for (int j = 0; j < net.n_hidden; ++j) {
    const std::size_t sj = static_cast<std::size_t>(j);
    g.w_out[sj] = r * t.hidden[sj];
    const double delta = r * net.w_out[sj] *
                         activation_derivative(t.pre_hidden[sj], net.activation_slope);
    g.b_hidden[sj] = delta;
    for (int i = 0; i < net.n_in; ++i) {
      g.w_hidden[static_cast<std::size_t>(j * net.n_in + i)] = delta * input[static_cast<std::size_t>(i)];
    }
  }
  return g;
}

double backprop_step(MlpNetwork& net, const std::vector<double>& input,
                     double target, double learning_rate) {
  const ForwardTrace t = forward_trace(net, input);
  const double err = target - t.output;
  const double r = -2.0 * err;
  // Same gradients as gradients(); phi' is recovered from the cached
  // activations as (a/2)(1 - phi^2) and deltas use the pre-update weights.
  const double slope = net.activation_slope;
  net.b_out[0] -= learning_rate * r;
  for (int j = 0; j < net.n_hidden; ++j) {
    const std::size_t sj = static_cast<std::size_t>(j);
    const double h = t.hidden[sj];
    const double delta = r * net.w_out[sj] * 0.5 * slope * (1.0 - h * h);
    net.w_out[sj] -= learning_rate * r * h;
    net.b_hidden[sj] -= learning_rate * delta;
    for (int i = 0; i < net.n_in; ++i) {
      net.w_hidden[static_cast<std::size_t>(j * net.n_in + i)] -=
          learning_rate * delta * input[static_cast<std::size_t>(i)];
    }
  }
  return err * err;
}

double normalize(double x, const FeatureScaling& s) {
  if (!(s.std > 0.0)) throw ValidationError("degenerate feature: scaling std must be > 0");
  return (x - s.mean) / s.std;
}

double denormalize(double z, const FeatureScaling& s) {
  if (!(s.std > 0.0)) throw ValidationError("degenerate feature: scaling std must be > 0");
  return z * s.std + s.mean;
}

FeatureScaling fit_scaling(const std::vector<double>& values) {
  if (values.size() < 2) throw ValidationError("degenerate feature: need >= 2 values to fit scaling");
  const double n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / (n - 1.0));
  if (!(sd > 0.0)) throw ValidationError("degenerate feature: zero spread");
  return FeatureScaling{mean, sd};
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
  if (max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
  if (!(error_goal > 0.0)) throw ConfigError("error_goal must be > 0");
}

TrainResult train(MlpNetwork net, const TrainingSet& ts, const TrainConfig& cfg) {
  cfg.validate();
  net.validate();
  if (ts.size() == 0) throw ConfigError("train: empty training set");
  if (ts.targets.size() != ts.inputs.size()) throw ConfigError("train: inputs/targets size mismatch");

  const std::size_t count = ts.size();
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> input(2);

  TrainResult result;
  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    double sum_sq = 0.0;
    if (cfg.batch_mode) {
      MlpGradients acc;
      acc.w_hidden.assign(net.w_hidden.size(), 0.0);
      acc.b_hidden.assign(net.b_hidden.size(), 0.0);
      acc.w_out.assign(net.w_out.size(), 0.0);
      acc.b_out.assign(net.b_out.size(), 0.0);
      for (std::size_t p = 0; p < count; ++p) {
        input[0] = ts.inputs[p][0];
        input[1] = ts.inputs[p][1];
        const ForwardTrace t = forward_trace(net, input);
        const double err = ts.targets[p] - t.output;
        sum_sq += err * err;
        const MlpGradients g = gradients(net, input, ts.targets[p]);
        for (std::size_t i = 0; i < acc.w_hidden.size(); ++i) acc.w_hidden[i] += g.w_hidden[i];
        for (std::size_t i = 0; i < acc.b_hidden.size(); ++i) acc.b_hidden[i] += g.b_hidden[i];
        for (std::size_t i = 0; i < acc.w_out.size(); ++i) acc.w_out[i] += g.w_out[i];
        for (std::size_t i = 0; i < acc.b_out.size(); ++i) acc.b_out[i] += g.b_out[i];
      }
      const double scale = cfg.learning_rate / static_cast<double>(count);
      for (std::size_t i = 0; i < net.w_hidden.size(); ++i) net.w_hidden[i] -= scale * acc.w_hidden[i];
      for (std::size_t i = 0; i < net.b_hidden.size(); ++i) net.b_hidden[i] -= scale * acc.b_hidden[i];
      for (std::size_t i = 0; i < net.w_out.size(); ++i) net.w_out[i] -= scale * acc.w_out[i];
      for (std::size_t i = 0; i < net.b_out.size(); ++i) net.b_out[i] -= scale * acc.b_out[i];
    } else {
      // Per-pattern updates in a seeded shuffle order, fresh each epoch.
      for (std::size_t i = 0; i + 1 < count; ++i) {
        const std::uint64_t h = counter_hash(cfg.shuffle_seed, RngStream::kMlpShuffle,
                                             static_cast<std::uint64_t>(epoch), i);
        const std::size_t j = i + static_cast<std::size_t>(h % (count - i));
        std::swap(order[i], order[j]);
      }
      for (std::size_t p : order) {
        input[0] = ts.inputs[p][0];
        input[1] = ts.inputs[p][1];
        sum_sq += backprop_step(net, input, ts.targets[p], cfg.learning_rate);
      }
    }
    const double mse = sum_sq / static_cast<double>(count);
    if (!std::isfinite(mse)) {
      throw NumericalError("training diverged at epoch " + std::to_string(epoch));
    }
    result.epochs_run = epoch;
    result.final_mse = mse;
    if (mse <= cfg.error_goal) break;
  }
  result.net = std::move(net);
  return result;
}

namespace {

constexpr std::uint64_t kMlpMagic = 0x31454E504C4D4B45ull;  // "EKMLPNE1"
constexpr std::uint64_t kMlpVersion = 1;

void put_u64(std::ostream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

std::uint64_t get_u64(std::istream& is) {
  unsigned char b[8] = {};
  is.read(reinterpret_cast<char*>(b), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

void put_f64(std::ostream& os, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put_u64(os, bits);
}

double get_f64(std::istream& is) {
  const std::uint64_t bits = get_u64(is);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

}  // namespace

void save_mlp(const ScaledMlp& m, const std::filesystem::path& path) {
  m.net.validate();
  if (m.net.n_in != 2) throw ConfigError("save_mlp: scaling storage assumes n_in == 2");
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open for writing: " + path.string());
  put_u64(os, kMlpMagic);
  put_u64(os, kMlpVersion);
  put_u64(os, static_cast<std::uint64_t>(m.net.n_in));
  put_u64(os, static_cast<std::uint64_t>(m.net.n_hidden));
  put_u64(os, static_cast<std::uint64_t>(m.net.n_out));
  put_f64(os, m.net.activation_slope);
  for (double v : m.net.w_hidden) put_f64(os, v);
  for (double v : m.net.b_hidden) put_f64(os, v);
  for (double v : m.net.w_out) put_f64(os, v);
  for (double v : m.net.b_out) put_f64(os, v);
  for (const auto& s : m.input_scaling) {
    put_f64(os, s.mean);
    put_f64(os, s.std);
  }
  put_f64(os, m.target_scaling.mean);
  put_f64(os, m.target_scaling.std);
  if (!os) throw IoError("write failed: " + path.string());
}

ScaledMlp load_mlp(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open for reading: " + path.string());
  if (get_u64(is) != kMlpMagic) throw IoError("bad mlp magic in " + path.string());
  if (get_u64(is) != kMlpVersion) throw IoError("unsupported mlp version in " + path.string());
  ScaledMlp m;
  m.net.n_in = static_cast<int>(get_u64(is));
  m.net.n_hidden = static_cast<int>(get_u64(is));
  m.net.n_out = static_cast<int>(get_u64(is));
  m.net.activation_slope = get_f64(is);
  if (m.net.n_in != 2 || m.net.n_hidden < 1 || m.net.n_out != 1) {
    throw IoError("unsupported mlp shape in " + path.string());
  }
  m.net.w_hidden.resize(static_cast<std::size_t>(m.net.n_hidden) * 2);
  m.net.b_hidden.resize(static_cast<std::size_t>(m.net.n_hidden));
  m.net.w_out.resize(static_cast<std::size_t>(m.net.n_hidden));
  m.net.b_out.resize(1);
  for (auto& v : m.net.w_hidden) v = get_f64(is);
  for (auto& v : m.net.b_hidden) v = get_f64(is);
  for (auto& v : m.net.w_out) v = get_f64(is);
  for (auto& v : m.net.b_out) v = get_f64(is);
  for (auto& s : m.input_scaling) {
    s.mean = get_f64(is);
    s.std = get_f64(is);
  }
  m.target_scaling.mean = get_f64(is);
  m.target_scaling.std = get_f64(is);
  if (!is) throw IoError("truncated mlp file: " + path.string());
  m.net.validate();
  return m;
}

}  // namespace emukf
