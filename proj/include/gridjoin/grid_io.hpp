#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>

#include "gridjoin/error.hpp"
#include "gridjoin/grid.hpp"

namespace gridjoin {

// Grid file format: 64-byte header
//   [0,8)   magic "GJGRID01"
//   [8,12)  u32 width, little-endian
//   [12,16) u32 height, little-endian
//   [16,24) f64 origin_x, little-endian
//   [24,32) f64 origin_y, little-endian
//   [32,40) f64 resolution, little-endian
//   [40,64) zero padding
// followed by width*height f64 values, row-major, little-endian.
inline constexpr std::size_t kGridHeaderSize = 64;
inline constexpr char kGridMagic[9] = "GJGRID01";

namespace detail {

inline void put_u32_le(unsigned char* out, std::uint32_t v) {
  out[0] = static_cast<unsigned char>(v);
  out[1] = static_cast<unsigned char>(v >> 8);
  out[2] = static_cast<unsigned char>(v >> 16);
  out[3] = static_cast<unsigned char>(v >> 24);
}

inline std::uint32_t get_u32_le(const unsigned char* in) {
  return static_cast<std::uint32_t>(in[0]) |
         (static_cast<std::uint32_t>(in[1]) << 8) |
         (static_cast<std::uint32_t>(in[2]) << 16) |
         (static_cast<std::uint32_t>(in[3]) << 24);
}

inline void put_f64_le(unsigned char* out, double v) {
  const std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i)
    out[i] = static_cast<unsigned char>(bits >> (8 * i));
}

inline double get_f64_le(const unsigned char* in) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i)
    bits |= static_cast<std::uint64_t>(in[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

}  // namespace detail

inline void write_grid(const Grid2D& grid, const std::string& path) {
  grid.layout.validate();
  if (grid.values.size() != grid.layout.cell_count())
    throw InputError("write_grid: value count does not match layout");
  if (!grid.all_finite())
    throw InputError("write_grid: grid contains non-finite values");

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("write_grid: cannot open for writing: " + path);

  std::array<unsigned char, kGridHeaderSize> header{};
  std::memcpy(header.data(), kGridMagic, 8);
  detail::put_u32_le(header.data() + 8, static_cast<std::uint32_t>(grid.layout.width));
  detail::put_u32_le(header.data() + 12, static_cast<std::uint32_t>(grid.layout.height));
  detail::put_f64_le(header.data() + 16, grid.layout.origin.x());
  detail::put_f64_le(header.data() + 24, grid.layout.origin.y());
  detail::put_f64_le(header.data() + 32, grid.layout.resolution);
  out.write(reinterpret_cast<const char*>(header.data()), header.size());

  std::vector<unsigned char> row(static_cast<std::size_t>(grid.layout.width) * 8);
  for (int cy = 0; cy < grid.layout.height; ++cy) {
    for (int cx = 0; cx < grid.layout.width; ++cx)
      detail::put_f64_le(row.data() + static_cast<std::size_t>(cx) * 8, grid.at(cx, cy));
    out.write(reinterpret_cast<const char*>(row.data()), row.size());
  }
  if (!out) throw InputError("write_grid: I/O failure writing " + path);
}

inline Grid2D read_grid(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("read_grid: cannot open: " + path);

  std::array<unsigned char, kGridHeaderSize> header{};
  in.read(reinterpret_cast<char*>(header.data()), header.size());
  if (in.gcount() != static_cast<std::streamsize>(header.size()))
    throw InputError("read_grid: truncated header in " + path);
  if (std::memcmp(header.data(), kGridMagic, 8) != 0)
    throw InputError("read_grid: bad magic in " + path);

  GridLayout layout;
  layout.width = static_cast<int>(detail::get_u32_le(header.data() + 8));
  layout.height = static_cast<int>(detail::get_u32_le(header.data() + 12));
  layout.origin.x() = detail::get_f64_le(header.data() + 16);
  layout.origin.y() = detail::get_f64_le(header.data() + 24);
  layout.resolution = detail::get_f64_le(header.data() + 32);
  try {
    layout.validate();
  } catch (const InputError& e) {
    throw InputError("read_grid: invalid header in " + path + ": " + e.what());
  }

  Grid2D grid(layout);
  std::vector<unsigned char> row(static_cast<std::size_t>(layout.width) * 8);
  for (int cy = 0; cy < layout.height; ++cy) {
    in.read(reinterpret_cast<char*>(row.data()), row.size());
    if (in.gcount() != static_cast<std::streamsize>(row.size()))
      throw InputError("read_grid: size mismatch (truncated payload) in " + path);
    for (int cx = 0; cx < layout.width; ++cx)
      grid.at(cx, cy) = detail::get_f64_le(row.data() + static_cast<std::size_t>(cx) * 8);
  }
  char extra;
  if (in.read(&extra, 1).gcount() != 0)
    throw InputError("read_grid: size mismatch (trailing bytes) in " + path);
  if (!grid.all_finite())
    throw InputError("read_grid: non-finite value in payload of " + path);
  return grid;
}

enum class RenderMode { occupancy, hit };

/// Writes a binary PGM (P5, maxval 255). Occupancy mode maps log-odds z to
/// gray = round(255 * (1 - sigmoid(z))), half away from zero, so occupied
/// is dark and unknown (z = 0) is mid-gray 128. Hit mode scales counts by
/// the maximum so heavily observed cells are dark. Rows are flipped so
/// world +y points up in the image.
inline void render_pgm(const Grid2D& grid, RenderMode mode,
                       const std::string& path) {
  if (!grid.all_finite())
    throw InputError("render_pgm: grid contains non-finite values");

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("render_pgm: cannot open for writing: " + path);
  out << "P5\n" << grid.layout.width << " " << grid.layout.height << "\n255\n";

  double max_hit = 0.0;
  if (mode == RenderMode::hit)
    for (double v : grid.values) max_hit = std::max(max_hit, v);

  std::vector<unsigned char> row(static_cast<std::size_t>(grid.layout.width));
  for (int cy = grid.layout.height - 1; cy >= 0; --cy) {
    for (int cx = 0; cx < grid.layout.width; ++cx) {
      const double v = grid.at(cx, cy);
      double gray;
      if (mode == RenderMode::occupancy) {
        gray = std::round(255.0 / (1.0 + std::exp(v)));
      } else {
        gray = max_hit > 0.0 ? std::round(255.0 * (1.0 - v / max_hit)) : 255.0;
      }
      row[static_cast<std::size_t>(cx)] =
          static_cast<unsigned char>(std::clamp(gray, 0.0, 255.0));
    }
    out.write(reinterpret_cast<const char*>(row.data()), row.size());
  }
  if (!out) throw InputError("render_pgm: I/O failure writing " + path);
}

}  // namespace gridjoin
