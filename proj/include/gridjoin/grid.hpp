#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstddef>
#include <optional>
#include <vector>

#include "gridjoin/error.hpp"

namespace gridjoin {

/// Geometry of a regular 2D grid. `origin` is the world position of the
/// center of cell (0, 0); cells are `resolution` meters apart. Values live
/// at cell centers, so in continuous cell coordinates cell (i, j) sits at
/// the integer point (i, j) and cell boundaries sit at half-integers.
struct GridLayout {
  int width = 0;
  int height = 0;
  Eigen::Vector2d origin{0.0, 0.0};
  double resolution = 0.0;

  void validate() const {
    if (width < 2 || height < 2)
      throw InputError("grid layout: width and height must be >= 2");
    if (!(resolution > 0.0) || !std::isfinite(resolution))
      throw InputError("grid layout: resolution must be positive");
    if (!origin.allFinite())
      throw InputError("grid layout: origin must be finite");
  }

  std::size_t cell_count() const {
    return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  }

  bool contains(const Eigen::Vector2i& c) const {
    return c.x() >= 0 && c.x() < width && c.y() >= 0 && c.y() < height;
  }

  // Row-major flat index.
  std::size_t flat(int cx, int cy) const {
    return static_cast<std::size_t>(cy) * static_cast<std::size_t>(width) +
           static_cast<std::size_t>(cx);
  }

  Eigen::Vector2d cell_to_world(int cx, int cy) const {
    return {origin.x() + cx * resolution, origin.y() + cy * resolution};
  }

  Eigen::Vector2d cell_to_world(const Eigen::Vector2i& c) const {
    return cell_to_world(c.x(), c.y());
  }

  // Continuous cell coordinates of a world point.
  Eigen::Vector2d world_to_cell(const Eigen::Vector2d& p) const {
    return (p - origin) / resolution;
  }

  // Index of the cell containing a world point (nearest center; exact .5
  // boundaries round up).
  Eigen::Vector2i world_to_cell_floor(const Eigen::Vector2d& p) const {
    const Eigen::Vector2d q = world_to_cell(p);
    return {static_cast<int>(std::floor(q.x() + 0.5)),
            static_cast<int>(std::floor(q.y() + 0.5))};
  }

  friend bool operator==(const GridLayout& a, const GridLayout& b) {
    return a.width == b.width && a.height == b.height &&
           a.resolution == b.resolution && a.origin.x() == b.origin.x() &&
           a.origin.y() == b.origin.y();
  }
};

/// Dense scalar field over a GridLayout, row-major.
struct Grid2D {
  GridLayout layout;
  std::vector<double> values;

  Grid2D() = default;
  explicit Grid2D(const GridLayout& l, double fill = 0.0) : layout(l) {
    l.validate();
    values.assign(l.cell_count(), fill);
  }

  double at(int cx, int cy) const { return values[layout.flat(cx, cy)]; }
  double& at(int cx, int cy) { return values[layout.flat(cx, cy)]; }

  bool all_finite() const {
    for (double v : values)
      if (!std::isfinite(v)) return false;
    return true;
  }
};

struct GridSample {
  double value = 0.0;
  Eigen::Vector2d gradient{0.0, 0.0};  // per cell unit
};

namespace detail {

// Footprint of a bilinear lookup: lower corner cell plus fractional offsets.
// Points on internal cell edges use the lower patch.
struct BilinearPatch {
  int x0, y0;
  double fx, fy;
};

inline std::optional<BilinearPatch> make_patch(const GridLayout& l,
                                               const Eigen::Vector2d& p) {
  const double fx0 = std::floor(p.x());
  const double fy0 = std::floor(p.y());
  // Written so NaN coordinates fail the comparisons and are rejected.
  if (!(fx0 >= 0.0) || !(fy0 >= 0.0) || !(fx0 <= l.width - 2) ||
      !(fy0 <= l.height - 2))
    return std::nullopt;
  return BilinearPatch{static_cast<int>(fx0), static_cast<int>(fy0),
                       p.x() - fx0, p.y() - fy0};
}

inline double patch_value(const Grid2D& g, const BilinearPatch& b) {
  const double v00 = g.at(b.x0, b.y0);
  const double v10 = g.at(b.x0 + 1, b.y0);
  const double v01 = g.at(b.x0, b.y0 + 1);
  const double v11 = g.at(b.x0 + 1, b.y0 + 1);
  return (1.0 - b.fy) * ((1.0 - b.fx) * v00 + b.fx * v10) +
         b.fy * ((1.0 - b.fx) * v01 + b.fx * v11);
}

inline GridSample patch_sample(const Grid2D& g, const BilinearPatch& b) {
  const double v00 = g.at(b.x0, b.y0);
  const double v10 = g.at(b.x0 + 1, b.y0);
  const double v01 = g.at(b.x0, b.y0 + 1);
  const double v11 = g.at(b.x0 + 1, b.y0 + 1);
  GridSample s;
  s.value = (1.0 - b.fy) * ((1.0 - b.fx) * v00 + b.fx * v10) +
            b.fy * ((1.0 - b.fx) * v01 + b.fx * v11);
  s.gradient.x() = (1.0 - b.fy) * (v10 - v00) + b.fy * (v11 - v01);
  s.gradient.y() = (1.0 - b.fx) * (v01 - v00) + b.fx * (v11 - v10);
  return s;
}

}  // namespace detail

/// Bilinear interpolation at continuous cell coordinates. Absent when any
/// corner of the floor(p) footprint falls outside the grid.
inline std::optional<double> interp_bilinear(const Grid2D& g,
                                             const Eigen::Vector2d& p) {
  const auto b = detail::make_patch(g.layout, p);
  if (!b) return std::nullopt;
  return detail::patch_value(g, *b);
}

/// Value and exact analytic gradient of the bilinear surface at p. The
/// gradient is per cell unit; divide by the layout resolution for a metric
/// gradient.
inline std::optional<GridSample> interp_gradient(const Grid2D& g,
                                                 const Eigen::Vector2d& p) {
  const auto b = detail::make_patch(g.layout, p);
  if (!b) return std::nullopt;
  return detail::patch_sample(g, *b);
}

}  // namespace gridjoin
