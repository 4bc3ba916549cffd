#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "elastored/errors.hpp"
#include "elastored/phantom.hpp"
#include "elastored/types.hpp"

namespace elastored {

// EFLD layout (little-endian):
//   char[4] "EFLD" | u32 version = 1 | u32 kind | u32 rows | u32 cols |
//   f64 data[planes][rows][cols]
// kind 0 (elasticity) has one plane; kinds 1 and 2 (displacement, force) have
// two: plane 0 holds x components, plane 1 y components.

enum class FieldKind : std::uint32_t { elasticity = 0, displacement = 1, force = 2 };

inline int plane_count(FieldKind k) { return k == FieldKind::elasticity ? 1 : 2; }

/// A nodal field as stored on disk. `values` is in library order: nodal for
/// elasticity, interleaved (x, y) per node for the vector kinds.
struct FieldFile {
  FieldKind kind = FieldKind::elasticity;
  RasterDims dims;
  Vector values;
};

inline constexpr std::size_t kEfldHeaderBytes = 4 + 4 * 4;

inline std::string encode_efld(const FieldFile& ff) {
  const int planes = plane_count(ff.kind);
  const Eigen::Index nodes = ff.dims.size();
  require_size(ff.values.size(), nodes * planes, "encode_efld");
  std::string out;
  out.reserve(kEfldHeaderBytes + std::size_t(8 * nodes * planes));
  auto put_u32 = [&](std::uint32_t v) { out.append(reinterpret_cast<const char*>(&v), 4); };
  out.append("EFLD", 4);
  put_u32(1);
  put_u32(std::uint32_t(ff.kind));
  put_u32(std::uint32_t(ff.dims.rows));
  put_u32(std::uint32_t(ff.dims.cols));
  for (int p = 0; p < planes; ++p)
    for (Eigen::Index n = 0; n < nodes; ++n) {
      const double v = ff.values[n * planes + p];
      out.append(reinterpret_cast<const char*>(&v), 8);
    }
  return out;
}

inline FieldFile decode_efld(const std::string& bytes) {
  if (bytes.size() < kEfldHeaderBytes || std::memcmp(bytes.data(), "EFLD", 4) != 0)
    throw ParseError("EFLD: bad magic or truncated header");
  auto u32_at = [&](std::size_t off) {
    std::uint32_t v;
    std::memcpy(&v, bytes.data() + off, 4);
    return v;
  };
  if (u32_at(4) != 1) throw ParseError("EFLD: unsupported version " + std::to_string(u32_at(4)));
  const std::uint32_t kind = u32_at(8);
  if (kind > 2) throw ParseError("EFLD: unknown kind " + std::to_string(kind));
  FieldFile ff;
  ff.kind = FieldKind(kind);
  ff.dims = {int(u32_at(12)), int(u32_at(16))};
  if (ff.dims.rows <= 0 || ff.dims.cols <= 0) throw ParseError("EFLD: empty raster");
  const int planes = plane_count(ff.kind);
  const Eigen::Index nodes = ff.dims.size();
  const std::size_t want = kEfldHeaderBytes + std::size_t(8 * nodes * planes);
  if (bytes.size() != want)
    throw ParseError("EFLD: expected " + std::to_string(want) + " bytes, got " +
                     std::to_string(bytes.size()));
  ff.values.resize(nodes * planes);
  const char* p = bytes.data() + kEfldHeaderBytes;
  for (int pl = 0; pl < planes; ++pl)
    for (Eigen::Index n = 0; n < nodes; ++n, p += 8) std::memcpy(&ff.values[n * planes + pl], p, 8);
  return ff;
}

inline std::string read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file_bytes(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out.write(bytes.data(), std::streamsize(bytes.size()));
  if (!out) throw IoError("write failed for " + path);
}

inline FieldFile read_efld(const std::string& path) {
  try {
    return decode_efld(read_file_bytes(path));
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what());
  }
}

inline void write_efld(const std::string& path, const FieldFile& ff) {
  write_file_bytes(path, encode_efld(ff));
}

inline FieldFile to_file(const ElasticityField& E, RasterDims dims) {
  return {FieldKind::elasticity, dims, E.values};
}
inline FieldFile to_file(const DisplacementField& u, RasterDims dims) {
  return {FieldKind::displacement, dims, u.values};
}
inline FieldFile to_file(const ForceField& f, RasterDims dims) {
  return {FieldKind::force, dims, f.values};
}

template <class Field>
Field field_from_file(const FieldFile& ff, FieldKind expected, RasterDims dims) {
  if (ff.kind != expected)
    throw ParseError("EFLD: expected kind " + std::to_string(unsigned(expected)) + ", got " +
                     std::to_string(unsigned(ff.kind)));
  if (!(ff.dims == dims))
    throw ParseError("EFLD: raster " + std::to_string(ff.dims.rows) + "x" + std::to_string(ff.dims.cols) +
                     " does not match mesh " + std::to_string(dims.rows) + "x" + std::to_string(dims.cols));
  return Field(ff.values);
}

// PGM (P5, maxval 255). Image row 0 is the top of the domain (y = height), so
// raster rows are written in reverse order.

inline std::string encode_pgm(const std::vector<std::uint8_t>& raster_bytes, RasterDims dims) {
  std::string out = "P5\n" + std::to_string(dims.cols) + " " + std::to_string(dims.rows) + "\n255\n";
  for (int r = dims.rows - 1; r >= 0; --r)
    out.append(reinterpret_cast<const char*>(&raster_bytes[std::size_t(r * dims.cols)]),
               std::size_t(dims.cols));
  return out;
}

/// Fixed-window gray rendering: lo maps to 0, hi to 255, values clamped.
inline std::string render_pgm(const Vector& field, RasterDims dims, double lo = 0.0, double hi = 1.0) {
  require_size(field.size(), dims.size(), "render_pgm");
  if (!(hi > lo)) throw InvalidArgument("render window must satisfy hi > lo");
  std::vector<std::uint8_t> px(std::size_t(dims.size()));
  for (Eigen::Index i = 0; i < field.size(); ++i) {
    const double t = std::clamp((field[i] - lo) / (hi - lo), 0.0, 1.0);
    px[std::size_t(i)] = std::uint8_t(std::lround(255.0 * t));
  }
  return encode_pgm(px, dims);
}

inline std::string encode_mask_pgm(const Mask& m) {
  std::vector<std::uint8_t> px(m.data.size());
  for (std::size_t i = 0; i < px.size(); ++i) px[i] = m.data[i] ? 255 : 0;
  return encode_pgm(px, m.dims);
}

/// Reads a P5 mask; pixels >= 128 are inclusion.
inline Mask decode_mask_pgm(const std::string& bytes) {
  std::istringstream in(bytes);
  std::string magic;
  in >> magic;
  auto next_int = [&]() {
    in >> std::ws;
    while (in.peek() == '#') {
      std::string line;
      std::getline(in, line);
      in >> std::ws;
    }
    long v = -1;
    if (!(in >> v)) throw ParseError("PGM: malformed header");
    return v;
  };
  if (magic != "P5") throw ParseError("PGM: expected P5 magic");
  const long cols = next_int(), rows = next_int(), maxval = next_int();
  if (cols <= 0 || rows <= 0 || maxval != 255) throw ParseError("PGM: need positive size and maxval 255");
  in.get();  // single whitespace after maxval
  const std::size_t start = std::size_t(in.tellg());
  if (bytes.size() != start + std::size_t(rows * cols))
    throw ParseError("PGM: pixel data length mismatch");
  Mask m = Mask::empty({int(rows), int(cols)});
  for (long r = 0; r < rows; ++r)
    for (long c = 0; c < cols; ++c) {
      const auto v = std::uint8_t(bytes[start + std::size_t((rows - 1 - r) * cols + c)]);
      m.data[std::size_t(r * cols + c)] = v >= 128 ? 1 : 0;
    }
  return m;
}

}  // namespace elastored
