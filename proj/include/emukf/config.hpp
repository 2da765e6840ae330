#pragma once

#include <filesystem>
#include <string>

#include "emukf/harness.hpp"

namespace emukf {

/// Experiment manifest plus non-semantic I/O settings. The text form is a
/// flat `key = value` document; every key is optional and defaults are the
/// manifest defaults. Unknown keys are rejected.
struct Config {
  ExperimentManifest manifest;
  std::string out_root = "runs";
};

/// Parses a config document. Throws ConfigError naming the offending key and
/// constraint on any invalid or unknown entry.
Config parse_config_text(const std::string& text);
Config load_config_file(const std::filesystem::path& path);

/// Canonical serialization: every key, fixed order, lossless round trip.
std::string serialize_config(const Config& cfg);

/// Applies one `key=value` override on top of the current values.
void apply_override(Config& cfg, const std::string& assignment);

/// 16-hex-digit digest over the semantically meaningful fields only
/// (io.* settings are excluded).
std::string manifest_hash(const ExperimentManifest& manifest);

}  // namespace emukf
