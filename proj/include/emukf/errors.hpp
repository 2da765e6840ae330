#pragma once

#include <stdexcept>
#include <string>

namespace emukf {

/// Base class for all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Invalid configuration: bad parameter values, dimension mismatches,
/// unknown config keys, empty training sets.
struct ConfigError : Error {
  using Error::Error;
};

/// Invalid runtime input: non-finite state, degenerate ensemble or feature.
struct ValidationError : Error {
  using Error::Error;
};

/// Numerical failure: integration blowup, eigensolver failure, filter
/// divergence, training divergence.
struct NumericalError : Error {
  using Error::Error;
};

/// Operation invoked in the wrong lifecycle state (e.g. untrained network).
struct StateError : Error {
  using Error::Error;
};

/// File format or read/write failure.
struct IoError : Error {
  using Error::Error;
};

/// A pipeline stage prerequisite is missing on disk.
struct MissingArtifactError : Error {
  explicit MissingArtifactError(const std::string& path)
      : Error("missing prerequisite artifact: " + path), missing_path(path) {}
  std::string missing_path;
};

}  // namespace emukf
