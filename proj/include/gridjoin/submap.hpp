#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gridjoin/error.hpp"
#include "gridjoin/grid.hpp"
#include "gridjoin/grid_io.hpp"
#include "gridjoin/se2.hpp"

namespace gridjoin {

/// One lidar scan: beam angles in the sensor frame (strictly increasing),
/// measured ranges of the same length, and the sensor pose expressed in the
/// submap frame. A range greater than max_range means the beam returned
/// nothing.
struct LaserScan {
  std::vector<double> angles;
  std::vector<double> ranges;
  double max_range = 0.0;
  Pose2 pose_in_submap;

  void validate() const {
    if (angles.empty() || angles.size() != ranges.size())
      throw InputError("laser scan: angles and ranges must be nonempty and equal length");
    for (std::size_t i = 1; i < angles.size(); ++i)
      if (!(angles[i] > angles[i - 1]))
        throw InputError("laser scan: angles must be strictly increasing");
    for (double r : ranges)
      if (!(r >= 0.0)) throw InputError("laser scan: ranges must be nonnegative");
    if (!(max_range > 0.0)) throw InputError("laser scan: max_range must be positive");
  }
};

/// Evidence-grid update constants shared by every submap of a run. The
/// joiner's weighting assumes all submaps use the same values.
struct BuildParams {
  double log_odds_occ = 0.85;
  double log_odds_free = -0.4;
  double clamp = 10.0;
};

/// A local submap: log-odds occupancy plus per-cell observation counts on
/// one shared layout. Cells never touched by a beam stay at exactly 0.
struct Submap {
  int id = 0;
  Grid2D occupancy;
  Grid2D hits;
};

/// Cells crossed by the segment from start to end (world coordinates), in
/// order, excluding the endpoint cell and anything outside the layout.
/// Amanatides-Woo style incremental traversal; when the segment passes
/// exactly through a cell corner, x steps before y.
inline std::vector<Eigen::Vector2i> trace_ray(const GridLayout& layout,
                                              const Eigen::Vector2d& start,
                                              const Eigen::Vector2d& end) {
  if (start.x() == end.x() && start.y() == end.y())
    throw InputError("trace_ray: zero-length ray");

  // Shifted cell coordinates: cell c spans [c, c+1), boundaries at integers.
  const Eigen::Vector2d u0 = layout.world_to_cell(start) + Eigen::Vector2d(0.5, 0.5);
  const Eigen::Vector2d u1 = layout.world_to_cell(end) + Eigen::Vector2d(0.5, 0.5);

  Eigen::Vector2i cell(static_cast<int>(std::floor(u0.x())),
                       static_cast<int>(std::floor(u0.y())));
  const Eigen::Vector2i end_cell(static_cast<int>(std::floor(u1.x())),
                                 static_cast<int>(std::floor(u1.y())));
  const Eigen::Vector2d d = u1 - u0;
  const int sx = (d.x() > 0.0) - (d.x() < 0.0);
  const int sy = (d.y() > 0.0) - (d.y() < 0.0);

  constexpr double inf = std::numeric_limits<double>::infinity();
  const double t_delta_x = sx != 0 ? 1.0 / std::abs(d.x()) : inf;
  const double t_delta_y = sy != 0 ? 1.0 / std::abs(d.y()) : inf;
  double t_max_x = inf;
  if (sx > 0) t_max_x = (cell.x() + 1 - u0.x()) / d.x();
  if (sx < 0) t_max_x = (cell.x() - u0.x()) / d.x();
  double t_max_y = inf;
  if (sy > 0) t_max_y = (cell.y() + 1 - u0.y()) / d.y();
  if (sy < 0) t_max_y = (cell.y() - u0.y()) / d.y();

  std::vector<Eigen::Vector2i> out;
  const long max_steps = std::labs(end_cell.x() - cell.x()) +
                         std::labs(end_cell.y() - cell.y()) + 4;
  for (long step = 0; step <= max_steps; ++step) {
    if (cell == end_cell) break;
    if (layout.contains(cell)) out.push_back(cell);
    if (t_max_x < t_max_y || (t_max_x == t_max_y && sx != 0)) {
      if (sx == 0) break;
      cell.x() += sx;
      t_max_x += t_delta_x;
    } else {
      if (sy == 0) break;
      cell.y() += sy;
      t_max_y += t_delta_y;
    }
  }
  return out;
}

/// Smallest lattice-aligned layout covering every sensor position and beam
/// endpoint (no-returns counted at max_range), padded on all sides. The
/// origin is snapped down to a multiple of the resolution.
inline GridLayout scan_coverage_layout(const std::vector<LaserScan>& scans,
                                       double resolution, double padding) {
  if (scans.empty()) throw InputError("scan_coverage_layout: no scans");
  if (!(resolution > 0.0)) throw InputError("scan_coverage_layout: resolution must be positive");
  if (!(padding >= 0.0)) throw InputError("scan_coverage_layout: padding must be nonnegative");

  double min_x = std::numeric_limits<double>::infinity();
  double min_y = min_x, max_x = -min_x, max_y = -min_x;
  auto extend = [&](const Eigen::Vector2d& p) {
    min_x = std::min(min_x, p.x());
    min_y = std::min(min_y, p.y());
    max_x = std::max(max_x, p.x());
    max_y = std::max(max_y, p.y());
  };
  for (const LaserScan& scan : scans) {
    scan.validate();
    const Pose2& pose = scan.pose_in_submap;
    extend(pose.t);
    for (std::size_t k = 0; k < scan.angles.size(); ++k) {
      const double len = std::min(scan.ranges[k], scan.max_range);
      const double a = pose.theta + scan.angles[k];
      extend(pose.t + len * Eigen::Vector2d(std::cos(a), std::sin(a)));
    }
  }

  GridLayout layout;
  layout.resolution = resolution;
  layout.origin.x() = std::floor((min_x - padding) / resolution) * resolution;
  layout.origin.y() = std::floor((min_y - padding) / resolution) * resolution;
  layout.width = std::max(2, static_cast<int>(std::ceil((max_x + padding - layout.origin.x()) / resolution)) + 1);
  layout.height = std::max(2, static_cast<int>(std::ceil((max_y + padding - layout.origin.y()) / resolution)) + 1);
  layout.validate();
  return layout;
}

/// Evidence-grid mapping: each beam marks traversed cells free and (for
/// returned beams) its endpoint cell occupied; every touched cell counts
/// one observation in the hit map. No-return beams mark free space up to
/// max_range. Occupancy is clamped to [-clamp, clamp] after every update.
inline Submap build_submap(const std::vector<LaserScan>& scans,
                           const GridLayout& layout, const BuildParams& params,
                           int id = 0) {
  if (scans.empty()) throw InputError("build_submap: empty scan list");
  layout.validate();

  Submap sm;
  sm.id = id;
  sm.occupancy = Grid2D(layout);
  sm.hits = Grid2D(layout);

  auto deposit = [&](const Eigen::Vector2i& c, double log_odds) {
    double& z = sm.occupancy.at(c.x(), c.y());
    z = std::clamp(z + log_odds, -params.clamp, params.clamp);
    sm.hits.at(c.x(), c.y()) += 1.0;
  };

  for (const LaserScan& scan : scans) {
    scan.validate();
    const Pose2& pose = scan.pose_in_submap;
    if (!layout.contains(layout.world_to_cell_floor(pose.t)))
      throw InputError("build_submap: sensor pose outside layout");
    for (std::size_t k = 0; k < scan.angles.size(); ++k) {
      const bool returned = scan.ranges[k] <= scan.max_range;
      const double len = returned ? scan.ranges[k] : scan.max_range;
      if (len <= 0.0) {
        if (returned) deposit(layout.world_to_cell_floor(pose.t), params.log_odds_occ);
        continue;
      }
      const double a = pose.theta + scan.angles[k];
      const Eigen::Vector2d end =
          pose.t + len * Eigen::Vector2d(std::cos(a), std::sin(a));
      for (const Eigen::Vector2i& c : trace_ray(layout, pose.t, end))
        deposit(c, params.log_odds_free);
      if (returned) {
        const Eigen::Vector2i ec = layout.world_to_cell_floor(end);
        if (layout.contains(ec)) deposit(ec, params.log_odds_occ);
      }
    }
  }
  return sm;
}

namespace detail {

inline std::string submap_stem(int id) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "submap_%03d", id);
  return buf;
}

}  // namespace detail

/// Writes submap_<id>.json plus the occupancy and hit grids next to it.
/// Returns the sidecar path.
inline std::string write_submap(const Submap& sm, const std::string& directory) {
  const std::string stem = (std::filesystem::path(directory) / detail::submap_stem(sm.id)).string();
  write_grid(sm.occupancy, stem + ".occ.grid");
  write_grid(sm.hits, stem + ".hit.grid");
  nlohmann::json sidecar = {
      {"id", sm.id},
      {"width", sm.occupancy.layout.width},
      {"height", sm.occupancy.layout.height},
      {"origin_x", sm.occupancy.layout.origin.x()},
      {"origin_y", sm.occupancy.layout.origin.y()},
      {"resolution", sm.occupancy.layout.resolution},
  };
  std::ofstream out(stem + ".json", std::ios::trunc);
  if (!out) throw InputError("write_submap: cannot open for writing: " + stem + ".json");
  out << sidecar.dump() << "\n";
  return stem + ".json";
}

/// Reads a submap from its sidecar path; grids are looked up next to it.
inline Submap read_submap(const std::string& sidecar_path) {
  std::ifstream in(sidecar_path);
  if (!in) throw InputError("read_submap: cannot open: " + sidecar_path);
  nlohmann::json sidecar;
  try {
    in >> sidecar;
  } catch (const nlohmann::json::exception& e) {
    throw InputError("read_submap: malformed sidecar " + sidecar_path + ": " + e.what());
  }

  Submap sm;
  try {
    sm.id = sidecar.at("id").get<int>();
  } catch (const nlohmann::json::exception&) {
    throw InputError("read_submap: sidecar missing id: " + sidecar_path);
  }

  std::string stem = sidecar_path;
  if (stem.size() > 5 && stem.substr(stem.size() - 5) == ".json")
    stem = stem.substr(0, stem.size() - 5);
  sm.occupancy = read_grid(stem + ".occ.grid");
  sm.hits = read_grid(stem + ".hit.grid");

  if (!(sm.occupancy.layout == sm.hits.layout))
    throw InputError("read_submap: occupancy and hit grids disagree on layout: " + sidecar_path);
  const GridLayout& l = sm.occupancy.layout;
  if (sidecar.value("width", -1) != l.width || sidecar.value("height", -1) != l.height ||
      sidecar.value("origin_x", std::numeric_limits<double>::quiet_NaN()) != l.origin.x() ||
      sidecar.value("origin_y", std::numeric_limits<double>::quiet_NaN()) != l.origin.y() ||
      sidecar.value("resolution", -1.0) != l.resolution)
    throw InputError("read_submap: sidecar layout disagrees with grid headers: " + sidecar_path);
  for (std::size_t i = 0; i < sm.hits.values.size(); ++i) {
    if (sm.hits.values[i] < 0.0)
      throw InputError("read_submap: negative hit count: " + sidecar_path);
    if (sm.hits.values[i] == 0.0 && sm.occupancy.values[i] != 0.0)
      throw InputError("read_submap: occupancy without observations: " + sidecar_path);
  }
  return sm;
}

/// Loads every submap_*.json in a directory, ordered by id. Ids must be
/// 0..n-1 with no gaps.
inline std::vector<Submap> read_submap_dir(const std::string& directory) {
  std::vector<std::string> sidecars;
  std::error_code ec;
  for (const auto& entry : std::filesystem::directory_iterator(directory, ec)) {
    const std::string name = entry.path().filename().string();
    if (name.rfind("submap_", 0) == 0 && name.size() > 5 &&
        name.substr(name.size() - 5) == ".json")
      sidecars.push_back(entry.path().string());
  }
  if (ec) throw InputError("read_submap_dir: cannot open directory: " + directory);
  if (sidecars.empty()) throw InputError("read_submap_dir: no submap sidecars in " + directory);
  std::sort(sidecars.begin(), sidecars.end());

  std::vector<Submap> submaps;
  submaps.reserve(sidecars.size());
  for (const std::string& path : sidecars) submaps.push_back(read_submap(path));
  for (std::size_t i = 0; i < submaps.size(); ++i)
    if (submaps[i].id != static_cast<int>(i))
      throw InputError("read_submap_dir: submap ids must be contiguous from 0 in " + directory);
  return submaps;
}

}  // namespace gridjoin
