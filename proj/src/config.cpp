#include "emukf/config.hpp"

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <vector>

#include "emukf/errors.hpp"
#include "emukf/state.hpp"

namespace emukf {

namespace {

struct KeyHandler {
  std::string key;
  std::string constraint;
  bool semantic;  // participates in the manifest hash
  std::function<std::string(const Config&)> get;
  std::function<void(Config&, const std::string&)> set;
};

[[noreturn]] void bad_value(const std::string& key, const std::string& constraint) {
  throw ConfigError("invalid value for key '" + key + "': expected " + constraint);
}

long long to_int(const std::string& key, const std::string& constraint, const std::string& v,
                 long long lo, long long hi) {
  try {
    std::size_t pos = 0;
    const long long x = std::stoll(v, &pos);
    if (pos != v.size() || x < lo || x > hi) bad_value(key, constraint);
    return x;
  } catch (const ConfigError&) {
    throw;
  } catch (...) {
    bad_value(key, constraint);
  }
}

std::uint64_t to_u64(const std::string& key, const std::string& constraint, const std::string& v) {
  try {
    std::size_t pos = 0;
    const unsigned long long x = std::stoull(v, &pos);
    if (pos != v.size() || (!v.empty() && v[0] == '-')) bad_value(key, constraint);
    return x;
  } catch (const ConfigError&) {
    throw;
  } catch (...) {
    bad_value(key, constraint);
  }
}

double to_double(const std::string& key, const std::string& constraint, const std::string& v,
                 bool positive, bool allow_zero = false) {
  try {
    std::size_t pos = 0;
    const double x = std::stod(v, &pos);
    if (pos != v.size()) bad_value(key, constraint);
    if (positive && !(allow_zero ? x >= 0.0 : x > 0.0)) bad_value(key, constraint);
    return x;
  } catch (const ConfigError&) {
    throw;
  } catch (...) {
    bad_value(key, constraint);
  }
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true") return true;
  if (v == "false") return false;
  bad_value(key, "true|false");
}

const std::vector<KeyHandler>& key_table() {
  static const std::vector<KeyHandler> table = {
      {"model.kind", "lorenz96|lorenz63", true,
       [](const Config& c) {
         return c.manifest.model.kind == ModelKind::lorenz96 ? "lorenz96" : "lorenz63";
       },
       [](Config& c, const std::string& v) {
         if (v == "lorenz96") c.manifest.model.kind = ModelKind::lorenz96;
         else if (v == "lorenz63") {
           c.manifest.model.kind = ModelKind::lorenz63;
           c.manifest.model.dimension = 3;
         } else bad_value("model.kind", "lorenz96|lorenz63");
       }},
      {"model.dimension", "integer >= 3", true,
       [](const Config& c) { return std::to_string(c.manifest.model.dimension); },
       [](Config& c, const std::string& v) {
         c.manifest.model.dimension = static_cast<int>(to_int("model.dimension", "integer >= 3", v, 3, 1000000));
       }},
      {"model.forcing", "real", true,
       [](const Config& c) { return format_double(c.manifest.model.forcing); },
       [](Config& c, const std::string& v) {
         c.manifest.model.forcing = to_double("model.forcing", "real", v, false);
       }},
      {"model.dt", "real > 0", true,
       [](const Config& c) { return format_double(c.manifest.model.dt); },
       [](Config& c, const std::string& v) {
         c.manifest.model.dt = to_double("model.dt", "real > 0", v, true);
       }},
      {"model.steps_per_cycle", "integer >= 1", true,
       [](const Config& c) { return std::to_string(c.manifest.model.steps_per_cycle); },
       [](Config& c, const std::string& v) {
         c.manifest.model.steps_per_cycle =
             static_cast<int>(to_int("model.steps_per_cycle", "integer >= 1", v, 1, 1000000));
       }},
      {"cycles.spin_up", "integer >= 0", true,
       [](const Config& c) { return std::to_string(c.manifest.spin_up_cycles); },
       [](Config& c, const std::string& v) {
         c.manifest.spin_up_cycles = static_cast<int>(to_int("cycles.spin_up", "integer >= 0", v, 0, 100000000));
       }},
      {"cycles.training", "integer >= 1", true,
       [](const Config& c) { return std::to_string(c.manifest.training_cycles); },
       [](Config& c, const std::string& v) {
         c.manifest.training_cycles = static_cast<int>(to_int("cycles.training", "integer >= 1", v, 1, 100000000));
       }},
      {"cycles.hindcast", "integer >= 1", true,
       [](const Config& c) { return std::to_string(c.manifest.hindcast_cycles); },
       [](Config& c, const std::string& v) {
         c.manifest.hindcast_cycles = static_cast<int>(to_int("cycles.hindcast", "integer >= 1", v, 1, 100000000));
       }},
      {"obs.density", "real in (0, 1]", true,
       [](const Config& c) { return format_double(c.manifest.obs_density); },
       [](Config& c, const std::string& v) {
         const double d = to_double("obs.density", "real in (0, 1]", v, true);
         if (d > 1.0) bad_value("obs.density", "real in (0, 1]");
         c.manifest.obs_density = d;
       }},
      {"obs.sigma", "real > 0", true,
       [](const Config& c) { return format_double(c.manifest.obs_sigma); },
       [](Config& c, const std::string& v) {
         c.manifest.obs_sigma = to_double("obs.sigma", "real > 0", v, true);
       }},
      {"obs.schedule", "every_cycle|alternating", true,
       [](const Config& c) {
         return c.manifest.obs_schedule == ObsSchedule::every_cycle ? "every_cycle" : "alternating";
       },
       [](Config& c, const std::string& v) {
         if (v == "every_cycle") c.manifest.obs_schedule = ObsSchedule::every_cycle;
         else if (v == "alternating") c.manifest.obs_schedule = ObsSchedule::alternating;
         else bad_value("obs.schedule", "every_cycle|alternating");
       }},
      {"letkf.members", "integer >= 2", true,
       [](const Config& c) { return std::to_string(c.manifest.ensemble_size); },
       [](Config& c, const std::string& v) {
         c.manifest.ensemble_size = static_cast<int>(to_int("letkf.members", "integer >= 2", v, 2, 100000));
       }},
      {"letkf.radius", "integer >= 0", true,
       [](const Config& c) { return std::to_string(c.manifest.letkf.localization_radius); },
       [](Config& c, const std::string& v) {
         c.manifest.letkf.localization_radius =
             static_cast<int>(to_int("letkf.radius", "integer >= 0", v, 0, 1000000));
       }},
      {"letkf.inflation", "real >= 1", true,
       [](const Config& c) { return format_double(c.manifest.letkf.inflation_factor); },
       [](Config& c, const std::string& v) {
         const double f = to_double("letkf.inflation", "real >= 1", v, false);
         if (!(f >= 1.0)) bad_value("letkf.inflation", "real >= 1");
         c.manifest.letkf.inflation_factor = f;
       }},
      {"letkf.additive_inflation", "real >= 0", true,
       [](const Config& c) { return format_double(c.manifest.letkf.additive_inflation_std); },
       [](Config& c, const std::string& v) {
         c.manifest.letkf.additive_inflation_std =
             to_double("letkf.additive_inflation", "real >= 0", v, true, true);
       }},
      {"letkf.taper_gauss", "true|false", true,
       [](const Config& c) { return c.manifest.letkf.taper_gauss ? "true" : "false"; },
       [](Config& c, const std::string& v) {
         c.manifest.letkf.taper_gauss = to_bool("letkf.taper_gauss", v);
       }},
      {"letkf.taper_scale", "real > 0", true,
       [](const Config& c) { return format_double(c.manifest.letkf.taper_scale); },
       [](Config& c, const std::string& v) {
         c.manifest.letkf.taper_scale = to_double("letkf.taper_scale", "real > 0", v, true);
       }},
      {"letkf.init_spread", "real > 0", true,
       [](const Config& c) { return format_double(c.manifest.ensemble_init_spread); },
       [](Config& c, const std::string& v) {
         c.manifest.ensemble_init_spread = to_double("letkf.init_spread", "real > 0", v, true);
       }},
      {"emulator.regions", "integer >= 1", true,
       [](const Config& c) { return std::to_string(c.manifest.n_regions); },
       [](Config& c, const std::string& v) {
         c.manifest.n_regions = static_cast<int>(to_int("emulator.regions", "integer >= 1", v, 1, 1000000));
       }},
      {"emulator.variables", "integer == 1 (single-variable surrogate)", true,
       [](const Config& c) { return std::to_string(c.manifest.n_variables); },
       [](Config& c, const std::string& v) {
         c.manifest.n_variables = static_cast<int>(
             to_int("emulator.variables", "integer == 1 (single-variable surrogate)", v, 1, 1));
       }},
      {"emulator.spread_layers", "integer >= 0", true,
       [](const Config& c) { return std::to_string(c.manifest.pseudo.layers); },
       [](Config& c, const std::string& v) {
         c.manifest.pseudo.layers =
             static_cast<int>(to_int("emulator.spread_layers", "integer >= 0", v, 0, 1000000));
       }},
      {"emulator.neighbor_count", "integer == 2 (ring grid)", true,
       [](const Config& c) { return std::to_string(c.manifest.pseudo.neighbor_count); },
       [](Config& c, const std::string& v) {
         c.manifest.pseudo.neighbor_count =
             static_cast<int>(to_int("emulator.neighbor_count", "integer == 2 (ring grid)", v, 2, 2));
       }},
      {"emulator.normalize_pseudo", "true|false", true,
       [](const Config& c) { return c.manifest.pseudo.normalize_weights ? "true" : "false"; },
       [](Config& c, const std::string& v) {
         c.manifest.pseudo.normalize_weights = to_bool("emulator.normalize_pseudo", v);
       }},
      {"mlp.hidden", "integer >= 1", true,
       [](const Config& c) { return std::to_string(c.manifest.mlp_hidden); },
       [](Config& c, const std::string& v) {
         c.manifest.mlp_hidden = static_cast<int>(to_int("mlp.hidden", "integer >= 1", v, 1, 100000));
       }},
      {"mlp.activation_slope", "real > 0", true,
       [](const Config& c) { return format_double(c.manifest.mlp_activation_slope); },
       [](Config& c, const std::string& v) {
         c.manifest.mlp_activation_slope = to_double("mlp.activation_slope", "real > 0", v, true);
       }},
      {"mlp.learning_rate", "real > 0", true,
       [](const Config& c) { return format_double(c.manifest.train.learning_rate); },
       [](Config& c, const std::string& v) {
         c.manifest.train.learning_rate = to_double("mlp.learning_rate", "real > 0", v, true);
       }},
      {"mlp.max_epochs", "integer >= 1", true,
       [](const Config& c) { return std::to_string(c.manifest.train.max_epochs); },
       [](Config& c, const std::string& v) {
         c.manifest.train.max_epochs = static_cast<int>(to_int("mlp.max_epochs", "integer >= 1", v, 1, 100000000));
       }},
      {"mlp.error_goal", "real > 0", true,
       [](const Config& c) { return format_double(c.manifest.train.error_goal); },
       [](Config& c, const std::string& v) {
         c.manifest.train.error_goal = to_double("mlp.error_goal", "real > 0", v, true);
       }},
      {"mlp.batch_mode", "true|false", true,
       [](const Config& c) { return c.manifest.train.batch_mode ? "true" : "false"; },
       [](Config& c, const std::string& v) {
         c.manifest.train.batch_mode = to_bool("mlp.batch_mode", v);
       }},
      {"hindcast.compare_letkf", "true|false", true,
       [](const Config& c) { return c.manifest.compare_letkf_in_hindcast ? "true" : "false"; },
       [](Config& c, const std::string& v) {
         c.manifest.compare_letkf_in_hindcast = to_bool("hindcast.compare_letkf", v);
       }},
      {"seed", "unsigned 64-bit integer", true,
       [](const Config& c) { return std::to_string(c.manifest.seed); },
       [](Config& c, const std::string& v) {
         c.manifest.seed = to_u64("seed", "unsigned 64-bit integer", v);
       }},
      {"io.out_root", "directory path", false,
       [](const Config& c) { return c.out_root; },
       [](Config& c, const std::string& v) {
         if (v.empty()) bad_value("io.out_root", "directory path");
         c.out_root = v;
       }},
  };
  return table;
}

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

void set_key(Config& cfg, const std::string& key, const std::string& value) {
  for (const auto& h : key_table()) {
    if (h.key == key) {
      h.set(cfg, value);
      return;
    }
  }
  throw ConfigError("unknown config key '" + key + "'");
}

}  // namespace

Config parse_config_text(const std::string& text) {
  Config cfg;
  std::istringstream is(text);
  std::string line;
  std::set<std::string> seen;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + " is not 'key = value'");
    }
    const std::string key = trim(stripped.substr(0, eq));
    const std::string value = trim(stripped.substr(eq + 1));
    if (!seen.insert(key).second) {
      throw ConfigError("duplicate config key '" + key + "'");
    }
    set_key(cfg, key, value);
  }
  cfg.manifest.train.shuffle_seed = cfg.manifest.seed;
  cfg.manifest.validate();
  return cfg;
}

Config load_config_file(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open config file: " + path.string());
  std::ostringstream buf;
  buf << is.rdbuf();
  return parse_config_text(buf.str());
}

std::string serialize_config(const Config& cfg) {
  std::ostringstream os;
  for (const auto& h : key_table()) {
    os << h.key << " = " << h.get(cfg) << "\n";
  }
  return os.str();
}

void apply_override(Config& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) {
    throw ConfigError("override must be key=value, got '" + assignment + "'");
  }
  set_key(cfg, trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
  cfg.manifest.train.shuffle_seed = cfg.manifest.seed;
  cfg.manifest.validate();
}

std::string manifest_hash(const ExperimentManifest& manifest) {
  Config cfg;
  cfg.manifest = manifest;
  std::ostringstream os;
  for (const auto& h : key_table()) {
    if (h.semantic) os << h.key << "=" << h.get(cfg) << "\n";
  }
  const std::string text = os.str();
  std::uint64_t hash = 0xcbf29ce484222325ull;  // FNV-1a
  for (const unsigned char c : text) {
    hash ^= c;
    hash *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(hash));
  return buf;
}

}  // namespace emukf
