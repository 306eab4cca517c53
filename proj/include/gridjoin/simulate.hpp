#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gridjoin/error.hpp"
#include "gridjoin/rng.hpp"
#include "gridjoin/se2.hpp"
#include "gridjoin/submap.hpp"
#include "gridjoin/world.hpp"

namespace gridjoin {

struct NoiseSpec {
  double sigma_range = 0.0;      // meters, per beam
  double sigma_odo_xy = 0.0;     // meters, per odometry increment component
  double sigma_odo_theta = 0.0;  // radians, per odometry increment
  std::uint64_t seed = 0;

  void validate() const {
    if (!(sigma_range >= 0.0) || !(sigma_odo_xy >= 0.0) || !(sigma_odo_theta >= 0.0))
      throw InputError("noise spec: sigmas must be nonnegative");
  }
};

/// Beam geometry of the simulated scanner. Defaults are a 1081-beam,
/// 270-degree, 30 m unit (Hokuyo UTM-30LX style).
struct SensorSpec {
  int beams = 1081;
  double angle_min = -135.0 * kPi / 180.0;
  double angle_max = 135.0 * kPi / 180.0;
  double max_range = 30.0;

  void validate() const {
    if (beams < 2) throw InputError("sensor spec: need at least 2 beams");
    if (!(angle_min < angle_max)) throw InputError("sensor spec: angle_min must be below angle_max");
    if (!(max_range > 0.0)) throw InputError("sensor spec: max_range must be positive");
  }

  std::vector<double> make_angles() const {
    validate();
    std::vector<double> angles(static_cast<std::size_t>(beams));
    const double step = (angle_max - angle_min) / (beams - 1);
    for (int k = 0; k < beams; ++k) angles[static_cast<std::size_t>(k)] = angle_min + k * step;
    return angles;
  }
};

/// One simulated run: ground-truth poses (world frame), noisy body-frame
/// odometry increments (entry 0 is the identity), and noisy scans, all of
/// equal length.
struct Dataset {
  std::vector<Pose2> gt_poses;
  std::vector<Pose2> odometry;
  std::vector<LaserScan> scans;
  double max_range = 0.0;
  NoiseSpec noise;

  std::size_t size() const { return scans.size(); }
};

/// Constant-speed trajectory through the waypoints: positions interpolate
/// linearly and headings along the shortest arc, `steps_per_leg` poses per
/// leg after the first waypoint.
inline std::vector<Pose2> interpolate_waypoints(const std::vector<Pose2>& waypoints,
                                                int steps_per_leg) {
  if (waypoints.empty()) throw InputError("trajectory: empty waypoint list");
  if (steps_per_leg < 1) throw InputError("trajectory: steps_per_leg must be >= 1");
  std::vector<Pose2> poses;
  poses.push_back(waypoints.front());
  for (std::size_t leg = 0; leg + 1 < waypoints.size(); ++leg) {
    const Pose2& a = waypoints[leg];
    const Pose2& b = waypoints[leg + 1];
    const double dtheta = normalize_angle(b.theta - a.theta);
    for (int j = 1; j <= steps_per_leg; ++j) {
      const double alpha = static_cast<double>(j) / steps_per_leg;
      poses.push_back({a.t + alpha * (b.t - a.t), normalize_angle(a.theta + alpha * dtheta)});
    }
  }
  return poses;
}

/// Simulates a dataset: ground truth from the interpolated trajectory,
/// odometry increments with Gaussian noise on each component, scans with
/// Gaussian range noise. Deterministic for a fixed seed: one noise draw
/// per odometry component and per beam, in pose order (range noise is
/// drawn for every beam but only applied to returned ones).
inline Dataset simulate(const World& world, const std::vector<Pose2>& waypoints,
                        const SensorSpec& sensor, int steps_per_leg,
                        const NoiseSpec& noise) {
  world.validate();
  sensor.validate();
  noise.validate();
  for (const Pose2& wp : waypoints)
    if (!world.inside_bounds(wp.t)) throw InputError("simulate: waypoint outside world bounds");

  Dataset ds;
  ds.max_range = sensor.max_range;
  ds.noise = noise;
  ds.gt_poses = interpolate_waypoints(waypoints, steps_per_leg);

  const std::vector<double> angles = sensor.make_angles();
  GaussianSampler gauss(noise.seed);

  for (std::size_t k = 0; k < ds.gt_poses.size(); ++k) {
    if (k == 0) {
      ds.odometry.push_back({});
    } else {
      Pose2 inc = between(ds.gt_poses[k - 1], ds.gt_poses[k]);
      inc.t.x() += gauss.sample(noise.sigma_odo_xy);
      inc.t.y() += gauss.sample(noise.sigma_odo_xy);
      inc.theta = normalize_angle(inc.theta + gauss.sample(noise.sigma_odo_theta));
      ds.odometry.push_back(inc);
    }
    std::vector<double> ranges = raycast(world, ds.gt_poses[k], angles, sensor.max_range);
    for (double& r : ranges) {
      const double n = gauss.sample(noise.sigma_range);
      if (r <= sensor.max_range) r = std::max(0.0, r + n);
    }
    LaserScan scan;
    scan.angles = angles;
    scan.ranges = std::move(ranges);
    scan.max_range = sensor.max_range;
    ds.scans.push_back(std::move(scan));
  }
  return ds;
}

/// Odometry-integrated absolute poses in the frame of scan 0 (pose 0 is
/// the identity).
inline std::vector<Pose2> integrate_odometry(const Dataset& ds) {
  std::vector<Pose2> poses;
  poses.reserve(ds.odometry.size());
  Pose2 cur;
  for (std::size_t k = 0; k < ds.odometry.size(); ++k) {
    if (k > 0) cur = compose(cur, ds.odometry[k]);
    poses.push_back(cur);
  }
  return poses;
}

/// Ground-truth poses re-expressed in the frame of pose 0, index-aligned
/// with integrate_odometry.
inline std::vector<Pose2> ground_truth_in_start_frame(const Dataset& ds) {
  std::vector<Pose2> poses;
  poses.reserve(ds.gt_poses.size());
  for (const Pose2& p : ds.gt_poses) poses.push_back(between(ds.gt_poses.front(), p));
  return poses;
}

/// One contiguous chunk of a dataset destined for one submap: scan range
/// [begin, end), the chunk's frame (pose of its first scan in the frame of
/// scan 0), and per-scan poses relative to that frame.
struct SubmapChunk {
  int begin = 0;
  int end = 0;
  Pose2 frame;
  std::vector<Pose2> poses_in_submap;
};

namespace detail {

inline std::vector<SubmapChunk> chunk_poses(const std::vector<Pose2>& abs_poses,
                                            int n_submaps) {
  const int n = static_cast<int>(abs_poses.size());
  if (n_submaps < 1 || n_submaps > n)
    throw InputError("partition: n_submaps out of range [1, scan count]");
  std::vector<SubmapChunk> chunks;
  const int base = n / n_submaps;
  const int rem = n % n_submaps;
  int begin = 0;
  for (int i = 0; i < n_submaps; ++i) {
    SubmapChunk c;
    c.begin = begin;
    c.end = begin + base + (i < rem ? 1 : 0);
    c.frame = abs_poses[static_cast<std::size_t>(c.begin)];
    for (int k = c.begin; k < c.end; ++k)
      c.poses_in_submap.push_back(between(c.frame, abs_poses[static_cast<std::size_t>(k)]));
    chunks.push_back(std::move(c));
    begin = chunks.back().end;
  }
  return chunks;
}

}  // namespace detail

/// Near-equal contiguous chunks with frames and within-submap poses taken
/// from integrated odometry. Chunk 0's frame is the identity (the gauge).
inline std::vector<SubmapChunk> partition(const Dataset& ds, int n_submaps) {
  return detail::chunk_poses(integrate_odometry(ds), n_submaps);
}

/// Same chunking driven by ground-truth poses (in the frame of pose 0);
/// used to build reference maps and frames for evaluation.
inline std::vector<SubmapChunk> partition_ground_truth(const Dataset& ds, int n_submaps) {
  return detail::chunk_poses(ground_truth_in_start_frame(ds), n_submaps);
}

// Dataset file (versioned "gjds-1"): JSON-lines text. The header line has
// keys version, angles, max_range, noise {sigma_range, sigma_odo_xy,
// sigma_odo_theta}, seed; each following line is one scan with keys gt
// [x,y,theta], odo [dx,dy,dtheta], ranges [floats].
inline void write_dataset(const Dataset& ds, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw InputError("write_dataset: cannot open for writing: " + path);
  static const std::vector<double> no_angles;
  const std::vector<double>& angles = ds.scans.empty() ? no_angles : ds.scans.front().angles;
  nlohmann::json header = {
      {"version", "gjds-1"},
      {"angles", angles},
      {"max_range", ds.max_range},
      {"noise",
       {{"sigma_range", ds.noise.sigma_range},
        {"sigma_odo_xy", ds.noise.sigma_odo_xy},
        {"sigma_odo_theta", ds.noise.sigma_odo_theta}}},
      {"seed", ds.noise.seed},
  };
  out << header.dump() << "\n";
  for (std::size_t k = 0; k < ds.size(); ++k) {
    nlohmann::json rec = {
        {"gt", {ds.gt_poses[k].t.x(), ds.gt_poses[k].t.y(), ds.gt_poses[k].theta}},
        {"odo", {ds.odometry[k].t.x(), ds.odometry[k].t.y(), ds.odometry[k].theta}},
        {"ranges", ds.scans[k].ranges},
    };
    out << rec.dump() << "\n";
  }
  if (!out) throw InputError("write_dataset: I/O failure writing " + path);
}

inline Dataset read_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("dataset file not found: " + path);
  std::string line;
  if (!std::getline(in, line)) throw InputError("read_dataset: empty file: " + path);

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw InputError("read_dataset: malformed header in " + path + ": " + e.what());
  }

  Dataset ds;
  std::vector<double> angles;
  try {
    if (header.at("version").get<std::string>() != "gjds-1")
      throw InputError("read_dataset: unsupported version in " + path);
    angles = header.at("angles").get<std::vector<double>>();
    ds.max_range = header.at("max_range").get<double>();
    ds.noise.sigma_range = header.at("noise").at("sigma_range").get<double>();
    ds.noise.sigma_odo_xy = header.at("noise").at("sigma_odo_xy").get<double>();
    ds.noise.sigma_odo_theta = header.at("noise").at("sigma_odo_theta").get<double>();
    ds.noise.seed = header.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw InputError("read_dataset: bad header field in " + path + ": " + e.what());
  }

  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
      const auto gt = rec.at("gt").get<std::vector<double>>();
      const auto odo = rec.at("odo").get<std::vector<double>>();
      auto ranges = rec.at("ranges").get<std::vector<double>>();
      if (gt.size() != 3 || odo.size() != 3 || ranges.size() != angles.size())
        throw InputError("read_dataset: wrong field length at line " +
                         std::to_string(line_no) + " of " + path);
      ds.gt_poses.push_back({{gt[0], gt[1]}, gt[2]});
      ds.odometry.push_back({{odo[0], odo[1]}, odo[2]});
      LaserScan scan;
      scan.angles = angles;
      scan.ranges = std::move(ranges);
      scan.max_range = ds.max_range;
      ds.scans.push_back(std::move(scan));
    } catch (const nlohmann::json::exception& e) {
      throw InputError("read_dataset: malformed record at line " +
                       std::to_string(line_no) + " of " + path + ": " + e.what());
    }
  }
  if (ds.scans.empty()) throw InputError("read_dataset: no scan records in " + path);
  return ds;
}

}  // namespace gridjoin
