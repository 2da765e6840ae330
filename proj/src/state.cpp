#include "emukf/state.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

#include "emukf/errors.hpp"

namespace emukf {

namespace {

constexpr std::uint64_t kStateMagic = 0x3145544154534B45ull;  // "EKSTATE1"
constexpr std::uint64_t kStateVersion = 1;

void put_u64(std::ostream& os, std::uint64_t v) {
  std::array<unsigned char, 8> b{};
  for (int i = 0; i < 8; ++i) b[static_cast<std::size_t>(i)] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b.data()), 8);
}

std::uint64_t get_u64(std::istream& is) {
  std::array<unsigned char, 8> b{};
  is.read(reinterpret_cast<char*>(b.data()), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[static_cast<std::size_t>(i)]) << (8 * i);
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

bool StateVector::all_finite() const {
  for (double v : values) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

StateVector make_state(std::vector<double> values, std::int64_t time_index) {
  return StateVector{std::move(values), time_index};
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void save_state_binary(const StateVector& s, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open for writing: " + path.string());
  put_u64(os, kStateMagic);
  put_u64(os, kStateVersion);
  put_u64(os, static_cast<std::uint64_t>(s.values.size()));
  put_u64(os, static_cast<std::uint64_t>(s.time_index));
  for (double v : s.values) put_f64(os, v);
  if (!os) throw IoError("write failed: " + path.string());
}

StateVector load_state_binary(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open for reading: " + path.string());
  if (get_u64(is) != kStateMagic) throw IoError("bad state magic in " + path.string());
  if (get_u64(is) != kStateVersion) throw IoError("unsupported state version in " + path.string());
  const std::uint64_t n = get_u64(is);
  const std::int64_t t = static_cast<std::int64_t>(get_u64(is));
  StateVector s;
  s.time_index = t;
  s.values.resize(n);
  for (std::uint64_t i = 0; i < n; ++i) s.values[i] = get_f64(is);
  if (!is) throw IoError("truncated state file: " + path.string());
  return s;
}

void save_state_csv(const StateVector& s, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot open for writing: " + path.string());
  os << "# emukf-state v1 n=" << s.values.size() << " time_index=" << s.time_index << "\n";
  os << "index,value\n";
  for (std::size_t i = 0; i < s.values.size(); ++i) {
    os << i << "," << format_double(s.values[i]) << "\n";
  }
  if (!os) throw IoError("write failed: " + path.string());
}

StateVector load_state_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open for reading: " + path.string());
  std::string line;
  if (!std::getline(is, line) || line.rfind("# emukf-state v1", 0) != 0) {
    throw IoError("bad state CSV header in " + path.string());
  }
  StateVector s;
  const auto tpos = line.find("time_index=");
  if (tpos == std::string::npos) throw IoError("missing time_index in " + path.string());
  s.time_index = std::stoll(line.substr(tpos + 11));
  if (!std::getline(is, line) || line != "index,value") {
    throw IoError("bad state CSV column header in " + path.string());
  }
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw IoError("malformed row in " + path.string());
    s.values.push_back(std::strtod(line.c_str() + comma + 1, nullptr));
  }
  return s;
}

}  // namespace emukf
