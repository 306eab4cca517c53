// gridjoin: simulate 2D lidar datasets, build occupancy submaps, fuse them
// by jointly optimizing submap frames and the global map, and score the
// result. Exit codes: 0 ok, 1 bad input, 2 numerical failure.

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "gridjoin/gridjoin.hpp"

namespace {

using namespace gridjoin;

std::vector<Pose2> parse_waypoints(const std::string& text) {
  std::vector<Pose2> waypoints;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ';')) {
    if (item.find_first_not_of(" \t") == std::string::npos) continue;
    for (char& ch : item)
      if (ch == ',') ch = ' ';
    std::istringstream is(item);
    Pose2 p;
    is >> p.t.x() >> p.t.y() >> p.theta;
    if (is.fail()) throw InputError("cannot parse waypoint triple: '" + item + "'");
    waypoints.push_back(p);
  }
  if (waypoints.empty()) throw InputError("no waypoints given");
  return waypoints;
}

GridLayout parse_layout(const std::string& text, double resolution) {
  std::string item = text;
  for (char& ch : item)
    if (ch == ',') ch = ' ';
  std::istringstream is(item);
  GridLayout layout;
  layout.resolution = resolution;
  is >> layout.origin.x() >> layout.origin.y() >> layout.width >> layout.height;
  if (is.fail()) throw InputError("cannot parse layout 'ox,oy,width,height': '" + text + "'");
  layout.validate();
  return layout;
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw InputError("cannot create output directory: " + dir);
}

struct SimulateArgs {
  std::string world_path;
  std::string waypoints;
  std::string out_path;
  int steps_per_leg = 10;
  SensorSpec sensor;
  double fov_deg = 270.0;
  NoiseSpec noise;
};

int run_simulate(const SimulateArgs& args) {
  const World world = read_world(args.world_path);
  SensorSpec sensor = args.sensor;
  sensor.angle_min = -0.5 * args.fov_deg * kPi / 180.0;
  sensor.angle_max = 0.5 * args.fov_deg * kPi / 180.0;
  const Dataset ds = simulate(world, parse_waypoints(args.waypoints), sensor,
                              args.steps_per_leg, args.noise);
  write_dataset(ds, args.out_path);
  std::cout << "wrote " << ds.size() << " scans to " << args.out_path << "\n";
  return 0;
}

struct BuildArgs {
  std::string dataset_path;
  std::string out_dir;
  int n_submaps = 4;
  double resolution = 0.05;
  double pad = 1.0;
  BuildParams params;
  bool use_gt_poses = false;
};

int run_build(const BuildArgs& args) {
  const Dataset ds = read_dataset(args.dataset_path);
  ensure_dir(args.out_dir);

  const auto chunks = args.use_gt_poses ? partition_ground_truth(ds, args.n_submaps)
                                        : partition(ds, args.n_submaps);
  std::vector<Pose2> frames;
  for (std::size_t i = 0; i < chunks.size(); ++i) {
    const SubmapChunk& chunk = chunks[i];
    std::vector<LaserScan> scans;
    for (int k = chunk.begin; k < chunk.end; ++k) {
      LaserScan scan = ds.scans[static_cast<std::size_t>(k)];
      scan.pose_in_submap = chunk.poses_in_submap[static_cast<std::size_t>(k - chunk.begin)];
      scans.push_back(std::move(scan));
    }
    const GridLayout layout = scan_coverage_layout(scans, args.resolution, args.pad);
    const Submap sm = build_submap(scans, layout, args.params, static_cast<int>(i));
    write_submap(sm, args.out_dir);
    frames.push_back(chunk.frame);
  }
  const std::string frames_name = std::string("frames_") + (args.use_gt_poses ? "gt" : "init") + ".txt";
  write_frames(frames, (std::filesystem::path(args.out_dir) / frames_name).string());

  // Ground-truth chunk frames, always emitted for evaluation.
  std::vector<Pose2> gt_frames;
  for (const SubmapChunk& chunk : partition_ground_truth(ds, args.n_submaps))
    gt_frames.push_back(chunk.frame);
  write_frames(gt_frames, (std::filesystem::path(args.out_dir) / "frames_gt.txt").string());

  std::cout << "built " << chunks.size() << " submaps in " << args.out_dir << "\n";
  return 0;
}

struct JoinArgs {
  std::string submap_dir;
  std::string frames_path;
  std::string out_dir;
  double resolution = 0.1;
  double margin = 2.0;
  std::string layout_spec;  // optional "ox,oy,width,height"
  JoinOptions opts;
};

int run_join(const JoinArgs& args) {
  JoinProblem problem;
  problem.submaps = read_submap_dir(args.submap_dir);
  problem.frames = read_frames(args.frames_path);
  if (problem.frames.size() != problem.submaps.size())
    throw InputError("join: frames file does not match the submap count");
  problem.global_layout =
      args.layout_spec.empty()
          ? compute_global_layout(problem.submaps, problem.frames, args.margin, args.resolution)
          : parse_layout(args.layout_spec, args.resolution);

  ensure_dir(args.out_dir);
  const GnReport report = pose_only_gn(problem, args.opts);
  const Grid2D fused = recover_map(problem, problem.frames, args.opts.eps_hit);

  const std::filesystem::path out(args.out_dir);
  write_frames(problem.frames, (out / "frames_opt.txt").string());
  write_grid(fused, (out / "fused.grid").string());
  render_pgm(fused, RenderMode::occupancy, (out / "fused.pgm").string());
  write_report(report, (out / "report.json").string());

  std::cout << "joined " << problem.submaps.size() << " submaps in " << report.iterations
            << " iterations (" << (report.converged ? "converged" : "iteration cap") << "), "
            << "objective " << report.objective_trace.front() << " -> "
            << report.objective_trace.back() << "\n";
  return 0;
}

struct EvalArgs {
  std::string frames_path;
  std::string gt_frames_path;
  std::string map_path;
  std::string truth_map_path;
  std::string out_path;
};

int run_eval(const EvalArgs& args) {
  const std::vector<Pose2> est = read_frames(args.frames_path);
  const std::vector<Pose2> truth = read_frames(args.gt_frames_path);
  const PoseErrorSummary pe = pose_errors(est, truth);
  const Grid2D est_map = read_grid(args.map_path);
  const Grid2D truth_map = read_grid(args.truth_map_path);

  const nlohmann::json j = {
      {"mae_trans", pe.mae_trans},
      {"mae_rot", pe.mae_rot},
      {"rmse_trans", pe.rmse_trans},
      {"rmse_rot", pe.rmse_rot},
      {"auc", map_auc(est_map, truth_map)},
      {"precision", map_precision(est_map, truth_map)},
  };
  std::cout << j.dump(2) << "\n";
  if (!args.out_path.empty()) {
    std::ofstream out(args.out_path, std::ios::trunc);
    if (!out) throw InputError("eval: cannot open for writing: " + args.out_path);
    out << j.dump(2) << "\n";
  }
  return 0;
}

struct RenderArgs {
  std::string grid_path;
  std::string out_path;
  std::string mode = "occupancy";
};

int run_render(const RenderArgs& args) {
  const Grid2D grid = read_grid(args.grid_path);
  RenderMode mode;
  if (args.mode == "occupancy")
    mode = RenderMode::occupancy;
  else if (args.mode == "hit")
    mode = RenderMode::hit;
  else
    throw InputError("render: mode must be 'occupancy' or 'hit'");
  render_pgm(grid, mode, args.out_path);
  std::cout << "wrote " << args.out_path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"2D occupancy-grid submap fusion toolkit"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Key=value config file with one [section] per subcommand");
  app.allow_config_extras(true);

  SimulateArgs sim;
  CLI::App* simulate_cmd = app.add_subcommand("simulate", "Generate a noisy lidar dataset over a segment world");
  simulate_cmd->add_option("--world", sim.world_path, "World file")->required();
  simulate_cmd->add_option("--waypoints", sim.waypoints, "Trajectory 'x,y,theta; x,y,theta; ...'")->required();
  simulate_cmd->add_option("--out", sim.out_path, "Output dataset (JSON lines)")->required();
  simulate_cmd->add_option("--steps-per-leg", sim.steps_per_leg, "Scans per waypoint leg")->capture_default_str();
  simulate_cmd->add_option("--beams", sim.sensor.beams, "Beams per scan")->capture_default_str();
  simulate_cmd->add_option("--fov-deg", sim.fov_deg, "Field of view, degrees")->capture_default_str();
  simulate_cmd->add_option("--max-range", sim.sensor.max_range, "Sensor range, meters")->capture_default_str();
  simulate_cmd->add_option("--sigma-range", sim.noise.sigma_range, "Range noise std, meters")->capture_default_str();
  simulate_cmd->add_option("--sigma-odo-xy", sim.noise.sigma_odo_xy, "Odometry x/y noise std, meters")->capture_default_str();
  simulate_cmd->add_option("--sigma-odo-theta", sim.noise.sigma_odo_theta, "Odometry heading noise std, radians")->capture_default_str();
  simulate_cmd->add_option("--seed", sim.noise.seed, "PRNG seed")->capture_default_str();

  BuildArgs build;
  CLI::App* build_cmd = app.add_subcommand("build", "Build occupancy submaps from a dataset");
  build_cmd->add_option("--dataset", build.dataset_path, "Dataset file")->required();
  build_cmd->add_option("--out-dir", build.out_dir, "Output directory")->required();
  build_cmd->add_option("--submaps", build.n_submaps, "Number of submaps")->capture_default_str();
  build_cmd->add_option("--resolution", build.resolution, "Submap cell size, meters")->capture_default_str();
  build_cmd->add_option("--pad", build.pad, "Layout padding, meters")->capture_default_str();
  build_cmd->add_option("--log-odds-occ", build.params.log_odds_occ, "Occupied update")->capture_default_str();
  build_cmd->add_option("--log-odds-free", build.params.log_odds_free, "Free update")->capture_default_str();
  build_cmd->add_option("--clamp", build.params.clamp, "Log-odds clamp magnitude")->capture_default_str();
  build_cmd->add_flag("--use-gt-poses", build.use_gt_poses, "Use ground-truth poses instead of odometry");

  JoinArgs join;
  CLI::App* join_cmd = app.add_subcommand("join", "Fuse submaps by optimizing their frames and the global map");
  join_cmd->add_option("--submap-dir", join.submap_dir, "Directory of submap files")->required();
  join_cmd->add_option("--frames", join.frames_path, "Initial frames file")->required();
  join_cmd->add_option("--out-dir", join.out_dir, "Output directory")->required();
  join_cmd->add_option("--resolution", join.resolution, "Global cell size, meters")->capture_default_str();
  join_cmd->add_option("--margin", join.margin, "Layout margin, meters")->capture_default_str();
  join_cmd->add_option("--layout", join.layout_spec, "Fixed layout 'ox,oy,width,height' (cells)");
  join_cmd->add_option("--max-iterations", join.opts.max_iterations, "Iteration cap")->capture_default_str();
  join_cmd->add_option("--delta-tolerance", join.opts.delta_tolerance, "Stop when squared step norm falls below")->capture_default_str();
  join_cmd->add_option("--eps-hit", join.opts.eps_hit, "Minimum interpolated observation count")->capture_default_str();

  EvalArgs eval;
  CLI::App* eval_cmd = app.add_subcommand("eval", "Score frames and map against ground truth");
  eval_cmd->add_option("--frames", eval.frames_path, "Estimated frames")->required();
  eval_cmd->add_option("--gt-frames", eval.gt_frames_path, "Ground-truth frames")->required();
  eval_cmd->add_option("--map", eval.map_path, "Estimated map grid")->required();
  eval_cmd->add_option("--truth-map", eval.truth_map_path, "Reference map grid")->required();
  eval_cmd->add_option("--out", eval.out_path, "Also write the metrics JSON here");

  RenderArgs render;
  CLI::App* render_cmd = app.add_subcommand("render", "Render a grid file to PGM");
  render_cmd->add_option("--grid", render.grid_path, "Grid file")->required();
  render_cmd->add_option("--out", render.out_path, "Output PGM")->required();
  render_cmd->add_option("--mode", render.mode, "occupancy or hit")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }

  try {
    if (simulate_cmd->parsed()) return run_simulate(sim);
    if (build_cmd->parsed()) return run_build(build);
    if (join_cmd->parsed()) return run_join(join);
    if (eval_cmd->parsed()) return run_eval(eval);
    if (render_cmd->parsed()) return run_render(render);
  } catch (const gridjoin::InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const gridjoin::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
