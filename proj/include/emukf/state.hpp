#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace emukf {

/// Model state on the grid: one value per grid point plus a step counter.
/// Serves as truth, forecast and analysis field alike.
struct StateVector {
  std::vector<double> values;
  std::int64_t time_index = 0;

  int dimension() const { return static_cast<int>(values.size()); }
  bool all_finite() const;
};

StateVector make_state(std::vector<double> values, std::int64_t time_index = 0);

// Snapshot persistence. Binary layout, all fields little-endian:
//   magic   u64  "EKSTATE1"
//   version u64  1
//   n       u64
//   time    i64
//   values  f64 x n
// The CSV export mirrors the same record for inspection.

void save_state_binary(const StateVector& s, const std::filesystem::path& path);
StateVector load_state_binary(const std::filesystem::path& path);

void save_state_csv(const StateVector& s, const std::filesystem::path& path);
StateVector load_state_csv(const std::filesystem::path& path);

/// Formats a double with enough digits to round-trip bit-exactly.
std::string format_double(double v);

}  // namespace emukf
