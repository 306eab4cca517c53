#pragma once

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "gridjoin/error.hpp"
#include "gridjoin/se2.hpp"

namespace gridjoin {

struct Segment {
  Eigen::Vector2d a{0.0, 0.0};
  Eigen::Vector2d b{0.0, 0.0};
};

/// A 2D line-segment world for the scan simulator, with an axis-aligned
/// extent that must contain all segments and the whole trajectory.
struct World {
  std::vector<Segment> segments;
  Eigen::Vector2d bounds_min{0.0, 0.0};
  Eigen::Vector2d bounds_max{0.0, 0.0};

  bool inside_bounds(const Eigen::Vector2d& p) const {
    return p.x() >= bounds_min.x() && p.x() <= bounds_max.x() &&
           p.y() >= bounds_min.y() && p.y() <= bounds_max.y();
  }

  void validate() const {
    if (!(bounds_max.x() > bounds_min.x()) || !(bounds_max.y() > bounds_min.y()))
      throw InputError("world: bounds must have positive extent");
    if (segments.empty()) throw InputError("world: no segments");
    for (const Segment& s : segments) {
      if ((s.b - s.a).norm() <= 0.0)
        throw InputError("world: degenerate zero-length segment");
      if (!inside_bounds(s.a) || !inside_bounds(s.b))
        throw InputError("world: segment outside bounds");
    }
  }
};

/// World file: '#' comments, one `bounds xmin ymin xmax ymax` line, then
/// `segment x1 y1 x2 y2` lines.
inline World read_world(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("world file not found: " + path);

  World world;
  bool have_bounds = false;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ls(line);
    std::string kind;
    ls >> kind;
    if (kind == "bounds") {
      ls >> world.bounds_min.x() >> world.bounds_min.y() >> world.bounds_max.x() >> world.bounds_max.y();
      have_bounds = true;
    } else if (kind == "segment") {
      Segment s;
      ls >> s.a.x() >> s.a.y() >> s.b.x() >> s.b.y();
      world.segments.push_back(s);
    } else {
      throw InputError("world file: unknown record '" + kind + "' at line " +
                       std::to_string(line_no) + " of " + path);
    }
    if (ls.fail())
      throw InputError("world file: malformed line " + std::to_string(line_no) + " of " + path);
  }
  if (!have_bounds) throw InputError("world file: missing bounds line in " + path);
  world.validate();
  return world;
}

/// Distance from origin along the unit direction to the nearest segment,
/// or +inf when nothing is hit. Rays parallel to a segment ignore it.
inline double ray_distance(const World& world, const Eigen::Vector2d& origin,
                           const Eigen::Vector2d& dir) {
  double best = std::numeric_limits<double>::infinity();
  for (const Segment& seg : world.segments) {
    const Eigen::Vector2d e = seg.b - seg.a;
    const double denom = dir.x() * e.y() - dir.y() * e.x();
    if (std::abs(denom) < 1e-14 * e.norm()) continue;
    const Eigen::Vector2d rel = seg.a - origin;
    const double t = (rel.x() * e.y() - rel.y() * e.x()) / denom;
    const double u = (rel.x() * dir.y() - rel.y() * dir.x()) / denom;
    if (t >= 0.0 && u >= 0.0 && u <= 1.0) best = std::min(best, t);
  }
  return best;
}

/// Ranges for a fan of beams from `pose` (beam angle is relative to the
/// pose heading). Beams that hit nothing within max_range report
/// max_range + 1.
inline std::vector<double> raycast(const World& world, const Pose2& pose,
                                   const std::vector<double>& angles,
                                   double max_range) {
  if (!world.inside_bounds(pose.t))
    throw InputError("raycast: pose outside world bounds");
  if (!(max_range > 0.0)) throw InputError("raycast: max_range must be positive");

  std::vector<double> ranges(angles.size());
  for (std::size_t k = 0; k < angles.size(); ++k) {
    const double a = pose.theta + angles[k];
    const double d =
        ray_distance(world, pose.t, {std::cos(a), std::sin(a)});
    ranges[k] = d <= max_range ? d : max_range + 1.0;
  }
  return ranges;
}

}  // namespace gridjoin
