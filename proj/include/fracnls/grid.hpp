#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "errors.hpp"

namespace fracnls {

// Uniform periodic grid on [-L, L)^dim with M points per axis. The spacing is
// derived, not stored, so the invariant spacing * M = 2L holds by construction.
struct GridDescriptor {
  int dim = 2;
  int points_per_axis = 128;
  double box_half_length = 12.0;

  double spacing() const { return 2.0 * box_half_length / points_per_axis; }

  std::size_t total_points() const {
    std::size_t n = 1;
    for (int d = 0; d < dim; ++d) n *= static_cast<std::size_t>(points_per_axis);
    return n;
  }

  // Coordinate of index i along any axis: x_i = -L + i * spacing.
  double coordinate(int i) const { return -box_half_length + i * spacing(); }

  bool operator==(const GridDescriptor&) const = default;

  static GridDescriptor create(int dim, int points_per_axis, double box_half_length) {
    if (dim < 1 || dim > 3) throw ParameterError("grid dim must be 1, 2, or 3");
    if (points_per_axis < 4 || points_per_axis % 2 != 0)
      throw ParameterError("points_per_axis must be even and at least 4");
    if (!(box_half_length > 0.0) || !std::isfinite(box_half_length))
      throw ParameterError("box_half_length must be positive and finite");
    return GridDescriptor{dim, points_per_axis, box_half_length};
  }
};

// Real scalar field sampled on a grid, values in row-major order: the last
// axis varies fastest, linear index = ((i0 * M + i1) * M + i2) for dim 3.
struct Field {
  GridDescriptor grid;
  std::vector<double> values;
};

inline Field make_field(const GridDescriptor& g) {
  return Field{g, std::vector<double>(g.total_points(), 0.0)};
}

inline void require_matching(const Field& u, const char* what) {
  if (u.values.size() != u.grid.total_points())
    throw InvalidFieldError(std::string(what) + ": value count does not match grid");
}

inline void require_finite(const Field& u, const char* what) {
  require_matching(u, what);
  for (double v : u.values)
    if (!std::isfinite(v))
      throw InvalidFieldError(std::string(what) + ": field contains non-finite values");
}

// Decode a linear row-major index into per-axis indices.
inline void decode_index(const GridDescriptor& g, std::size_t lin, int* idx) {
  for (int d = g.dim - 1; d >= 0; --d) {
    idx[d] = static_cast<int>(lin % g.points_per_axis);
    lin /= g.points_per_axis;
  }
}

// Squared distance from the box center to the grid point with linear index lin.
inline double radius_sq(const GridDescriptor& g, std::size_t lin) {
  int idx[3] = {0, 0, 0};
  decode_index(g, lin, idx);
  double r2 = 0.0;
  for (int d = 0; d < g.dim; ++d) {
    double x = g.coordinate(idx[d]);
    r2 += x * x;
  }
  return r2;
}

namespace detail {

// The on-disk format is explicitly little-endian; refuse to build elsewhere
// rather than silently write incompatible files.
static_assert(std::endian::native == std::endian::little,
              "field I/O assumes a little-endian host");

inline void put_u32(std::string& out, std::uint32_t v) {
  char buf[4];
  std::memcpy(buf, &v, 4);
  out.append(buf, 4);
}

inline void put_f64(std::string& out, double v) {
  char buf[8];
  std::memcpy(buf, &v, 8);
  out.append(buf, 8);
}

// Write bytes to path atomically: stage into a sibling temp file, then rename.
inline void write_file_atomic(const std::string& path, const std::string& bytes) {
  namespace fs = std::filesystem;
  fs::path target(path);
  if (target.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(target.parent_path(), ec);
  }
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("short write: " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) throw IoError("cannot rename " + tmp.string() + " to " + path + ": " + ec.message());
}

}  // namespace detail

inline constexpr std::uint32_t kFieldFormatVersion = 1;

// Binary field format: magic "FNLS", then version, dim, points_per_axis as
// u32, box_half_length as f64, then the row-major values as f64, all
// little-endian.
inline void write_field(const Field& u, const std::string& path) {
  require_matching(u, "write_field");
  std::string bytes;
  bytes.reserve(24 + 8 * u.values.size());
  bytes.append("FNLS", 4);
  detail::put_u32(bytes, kFieldFormatVersion);
  detail::put_u32(bytes, static_cast<std::uint32_t>(u.grid.dim));
  detail::put_u32(bytes, static_cast<std::uint32_t>(u.grid.points_per_axis));
  detail::put_f64(bytes, u.grid.box_half_length);
  for (double v : u.values) detail::put_f64(bytes, v);
  detail::write_file_atomic(path, bytes);
}

inline Field read_field(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "FNLS", 4) != 0)
    throw IoError("not a field file (bad magic): " + path);
  auto get_u32 = [&]() {
    std::uint32_t v = 0;
    char buf[4];
    in.read(buf, 4);
    std::memcpy(&v, buf, 4);
    return v;
  };
  auto get_f64 = [&]() {
    double v = 0;
    char buf[8];
    in.read(buf, 8);
    std::memcpy(&v, buf, 8);
    return v;
  };
  std::uint32_t version = get_u32();
  if (version != kFieldFormatVersion)
    throw IoError("unsupported field format version in " + path);
  std::uint32_t dim = get_u32();
  std::uint32_t m = get_u32();
  double L = get_f64();
  if (!in) throw IoError("truncated field header: " + path);
  GridDescriptor g;
  try {
    g = GridDescriptor::create(static_cast<int>(dim), static_cast<int>(m), L);
  } catch (const ParameterError& e) {
    throw IoError("invalid grid in " + path + ": " + e.what());
  }
  Field u = make_field(g);
  for (double& v : u.values) v = get_f64();
  if (!in) throw IoError("truncated field values: " + path);
  return u;
}

// Lossy text export for plotting: one row per grid point, coordinates then
// value, printed with 9 significant digits. Round-trips go through the binary
// format, never through this.
inline void write_field_csv(const Field& u, const std::string& path) {
  require_matching(u, "write_field_csv");
  std::string out;
  for (int d = 0; d < u.grid.dim; ++d) out += "x" + std::to_string(d) + ",";
  out += "value\n";
  char buf[64];
  int idx[3];
  for (std::size_t lin = 0; lin < u.values.size(); ++lin) {
    decode_index(u.grid, lin, idx);
    for (int d = 0; d < u.grid.dim; ++d) {
      std::snprintf(buf, sizeof(buf), "%.9g,", u.grid.coordinate(idx[d]));
      out += buf;
    }
    std::snprintf(buf, sizeof(buf), "%.9g\n", u.values[lin]);
    out += buf;
  }
  detail::write_file_atomic(path, out);
}

}  // namespace fracnls
