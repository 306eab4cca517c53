#pragma once

// Shared pipeline fixtures for the unit and acceptance suites. Waypoint
// sets mirror the shipped configs in data/.

#include <string>
#include <vector>

#include "gridjoin/gridjoin.hpp"

namespace fx {

using namespace gridjoin;

inline std::string data_dir() { return GRIDJOIN_DATA_DIR; }

inline NoiseSpec paper_noise(std::uint64_t seed) { return {0.02, 0.04, 0.003, seed}; }

struct PipelineConfig {
  std::string world_file = "square.world";
  std::vector<Pose2> waypoints;
  int steps_per_leg = 16;
  SensorSpec sensor;
  NoiseSpec noise;
  int n_submaps = 3;
  double submap_resolution = 0.125;
  double pad = 1.0;
  BuildParams params;
  bool use_gt_poses = false;
};

// Matches data/square.cfg: lattice waypoints, zero heading, dyadic grid
// constants, clamping effectively off. The 271-degree fan keeps every
// beam angle off the exact multiples of 45 degrees, where corner-tie
// traversal from lattice poses would mark wall cells free.
inline PipelineConfig square_config(int n_submaps, const NoiseSpec& noise) {
  PipelineConfig cfg;
  cfg.world_file = "square.world";
  cfg.waypoints = {{{1.0, 1.0}, 0.0}, {{9.0, 1.0}, 0.0}, {{9.0, 9.0}, 0.0},
                   {{1.0, 9.0}, 0.0}, {{1.0, 1.0}, 0.0}};
  cfg.steps_per_leg = 16;
  cfg.sensor.beams = 541;
  cfg.sensor.angle_min = -135.5 * kPi / 180.0;
  cfg.sensor.angle_max = 135.5 * kPi / 180.0;
  cfg.noise = noise;
  cfg.n_submaps = n_submaps;
  cfg.submap_resolution = 0.125;
  cfg.params = {0.75, -0.5, 1e6};
  return cfg;
}

// Matches data/office.cfg.
inline PipelineConfig office_config(int n_submaps, const NoiseSpec& noise) {
  PipelineConfig cfg;
  cfg.world_file = "office.world";
  cfg.waypoints = {{{10.0, 10.0}, 0.0},
                   {{40.0, 10.0}, kPi / 2.0},
                   {{40.0, 40.0}, kPi},
                   {{10.0, 40.0}, -kPi / 2.0},
                   {{10.0, 10.0}, 0.0}};
  cfg.steps_per_leg = 20;
  cfg.sensor.beams = 1081;
  cfg.noise = noise;
  cfg.n_submaps = n_submaps;
  cfg.submap_resolution = 0.1;
  return cfg;
}

// Matches data/corridor.cfg.
inline PipelineConfig corridor_config(int n_submaps, const NoiseSpec& noise) {
  PipelineConfig cfg = office_config(n_submaps, noise);
  cfg.world_file = "corridor.world";
  cfg.waypoints = {{{6.0, 6.0}, 0.0},
                   {{44.0, 6.0}, kPi / 2.0},
                   {{44.0, 44.0}, kPi},
                   {{6.0, 44.0}, -kPi / 2.0},
                   {{6.0, 6.0}, 0.0}};
  return cfg;
}

struct PipelineResult {
  Dataset dataset;
  std::vector<Submap> submaps;
  std::vector<Pose2> frames_init;  // odometry chunk frames
  std::vector<Pose2> frames_gt;    // ground-truth chunk frames
};

inline std::vector<Submap> build_chunks(const Dataset& ds,
                                        const std::vector<SubmapChunk>& chunks,
                                        double resolution, double pad,
                                        const BuildParams& params) {
  std::vector<Submap> submaps;
  for (std::size_t i = 0; i < chunks.size(); ++i) {
    const SubmapChunk& chunk = chunks[i];
    std::vector<LaserScan> scans;
    for (int k = chunk.begin; k < chunk.end; ++k) {
      LaserScan scan = ds.scans[static_cast<std::size_t>(k)];
      scan.pose_in_submap = chunk.poses_in_submap[static_cast<std::size_t>(k - chunk.begin)];
      scans.push_back(std::move(scan));
    }
    const GridLayout layout = scan_coverage_layout(scans, resolution, pad);
    submaps.push_back(build_submap(scans, layout, params, static_cast<int>(i)));
  }
  return submaps;
}

inline PipelineResult run_pipeline(const PipelineConfig& cfg) {
  const World world = read_world(data_dir() + "/" + cfg.world_file);
  PipelineResult out;
  out.dataset = simulate(world, cfg.waypoints, cfg.sensor, cfg.steps_per_leg, cfg.noise);

  const auto odo_chunks = partition(out.dataset, cfg.n_submaps);
  const auto gt_chunks = partition_ground_truth(out.dataset, cfg.n_submaps);
  out.submaps = build_chunks(out.dataset, cfg.use_gt_poses ? gt_chunks : odo_chunks,
                             cfg.submap_resolution, cfg.pad, cfg.params);
  for (const SubmapChunk& c : odo_chunks) out.frames_init.push_back(c.frame);
  for (const SubmapChunk& c : gt_chunks) out.frames_gt.push_back(c.frame);
  return out;
}

inline double frame_translation_mae(const std::vector<Pose2>& a,
                                    const std::vector<Pose2>& b) {
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += (a[i].t - b[i].t).norm();
  return sum / static_cast<double>(a.size());
}

inline double frame_rotation_mae(const std::vector<Pose2>& a,
                                 const std::vector<Pose2>& b) {
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    sum += std::abs(normalize_angle(a[i].theta - b[i].theta));
  return sum / static_cast<double>(a.size());
}

}  // namespace fx
