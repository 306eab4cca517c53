#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/Eigenvalues>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gridjoin/error.hpp"
#include "gridjoin/grid.hpp"
#include "gridjoin/se2.hpp"
#include "gridjoin/submap.hpp"

namespace gridjoin {

/// Joint state of one fusion problem: the submaps, their current frame
/// estimates (frame 0 pinned to the identity as the gauge), the fixed
/// global layout, and the global hit map rebuilt from the current frames
/// before each linearization.
struct JoinProblem {
  std::vector<Submap> submaps;
  std::vector<Pose2> frames;
  GridLayout global_layout;
  Grid2D global_hits;
  // Optional dense occupancy initialization for the coupled solver. Only
  // full_gn_step and tests read it; the pose iteration takes no occupancy
  // input at all, so it cannot depend on this field.
  std::optional<Grid2D> initial_map;
};

struct JoinOptions {
  int max_iterations = 50;        // cap on pose updates
  double delta_tolerance = 1e-8;  // stop when the squared increment norm drops below
  double eps_hit = 1e-9;          // minimum interpolated observation count
};

/// One Gauss-Newton linearization, cell-major: flat per-residual arrays
/// grouped by observed global cell, plus per-cell aggregates. Each residual
/// couples exactly one global cell with one submap; rows belonging to
/// submap 0 have an identically zero pose Jacobian (gauge).
struct ResidualSystem {
  int n_submaps = 0;

  // Per residual, grouped by cell.
  std::vector<int> submap_of;
  std::vector<int> cell_of;      // dense observed-cell index
  std::vector<double> weight;    // observation share; the map-Jacobian entry
  std::vector<double> value;     // interpolated submap occupancy
  std::vector<Eigen::Matrix<double, 1, 3>> pose_jacobian;

  // Per observed cell (dense index order).
  std::vector<std::int64_t> cell_global;  // flat index into the global layout
  std::vector<int> first_residual;        // CSR: cell c owns [first[c], first[c+1])
  std::vector<double> weight_sq_sum;      // Gram diagonal of the map block
  std::vector<double> weighted_value_sum;

  // Global flat index -> dense observed index, -1 when unobserved.
  std::vector<int> cell_dense;

  std::size_t residual_count() const { return value.size(); }
  std::size_t observed_cells() const { return cell_global.size(); }
};

struct GnReport {
  int iterations = 0;
  std::vector<double> objective_trace;   // length iterations + 1
  std::vector<double> delta_norm_trace;  // one entry per applied update
  bool converged = false;
  double assemble_seconds = 0.0;
  double solve_seconds = 0.0;
  std::vector<std::vector<Pose2>> frame_trace;  // iterates, including the initial frames
};

/// Axis-aligned bounding box of all submap corner cells transformed by the
/// given frames, padded by `margin`, gridded at `resolution`. Fixed for the
/// whole solve.
inline GridLayout compute_global_layout(const std::vector<Submap>& submaps,
                                        const std::vector<Pose2>& frames,
                                        double margin, double resolution) {
  if (submaps.empty()) throw InputError("compute_global_layout: no submaps");
  if (submaps.size() != frames.size())
    throw InputError("compute_global_layout: frame count must match submap count");
  if (!(resolution > 0.0)) throw InputError("compute_global_layout: resolution must be positive");
  if (!(margin >= 0.0)) throw InputError("compute_global_layout: margin must be nonnegative");

  double min_x = std::numeric_limits<double>::infinity();
  double min_y = min_x, max_x = -min_x, max_y = -min_x;
  for (std::size_t i = 0; i < submaps.size(); ++i) {
    const GridLayout& l = submaps[i].occupancy.layout;
    const Eigen::Vector2i corners[4] = {
        {0, 0}, {l.width - 1, 0}, {0, l.height - 1}, {l.width - 1, l.height - 1}};
    for (const Eigen::Vector2i& c : corners) {
      const Eigen::Vector2d w = local_to_world(frames[i], l.cell_to_world(c));
      min_x = std::min(min_x, w.x());
      min_y = std::min(min_y, w.y());
      max_x = std::max(max_x, w.x());
      max_y = std::max(max_y, w.y());
    }
  }

  GridLayout layout;
  layout.resolution = resolution;
  layout.origin = {min_x - margin, min_y - margin};
  layout.width = std::max(2, static_cast<int>(std::ceil((max_x + margin - layout.origin.x()) / resolution)) + 1);
  layout.height = std::max(2, static_cast<int>(std::ceil((max_y + margin - layout.origin.y()) / resolution)) + 1);
  layout.validate();
  return layout;
}

namespace detail {

// Per-submap constants of one linearization pass.
struct FramedSubmap {
  Eigen::Matrix2d rot;
  Eigen::Vector2d t;
  Eigen::Vector2d origin;
  double inv_res;
};

inline std::vector<FramedSubmap> frame_submaps(const std::vector<Submap>& submaps,
                                               const std::vector<Pose2>& frames) {
  std::vector<FramedSubmap> out(submaps.size());
  for (std::size_t i = 0; i < submaps.size(); ++i) {
    out[i].rot = rot_matrix(frames[i].theta);
    out[i].t = frames[i].t;
    out[i].origin = submaps[i].occupancy.layout.origin;
    out[i].inv_res = 1.0 / submaps[i].occupancy.layout.resolution;
  }
  return out;
}

}  // namespace detail

/// Global hit map at the given frames: each cell accumulates the
/// bilinearly interpolated local observation counts of every submap whose
/// footprint contains its projection. Contributions at or below eps_hit
/// are dropped, exactly as the assembler drops them.
inline Grid2D build_global_hit_map_at(const std::vector<Submap>& submaps,
                                      const std::vector<Pose2>& frames,
                                      const GridLayout& layout, double eps_hit) {
  if (submaps.size() != frames.size())
    throw InputError("build_global_hit_map: frame count must match submap count");
  Grid2D out(layout, 0.0);
  const auto framed = detail::frame_submaps(submaps, frames);
  for (int cy = 0; cy < layout.height; ++cy) {
    for (int cx = 0; cx < layout.width; ++cx) {
      const Eigen::Vector2d w = layout.cell_to_world(cx, cy);
      double sum = 0.0;
      for (std::size_t i = 0; i < submaps.size(); ++i) {
        const detail::FramedSubmap& f = framed[i];
        const Eigen::Vector2d q = (f.rot * (w - f.t) - f.origin) * f.inv_res;
        const auto patch = detail::make_patch(submaps[i].hits.layout, q);
        if (!patch) continue;
        const double n = detail::patch_value(submaps[i].hits, *patch);
        if (n > eps_hit) sum += n;
      }
      out.at(cx, cy) = sum;
    }
  }
  return out;
}

inline Grid2D build_global_hit_map(const JoinProblem& problem,
                                   double eps_hit = JoinOptions{}.eps_hit) {
  return build_global_hit_map_at(problem.submaps, problem.frames,
                                 problem.global_layout, eps_hit);
}

/// Linearizes the weighted fusion residuals at the given frames. For every
/// global cell with a positive hit count and every submap observing it
/// above eps_hit, one residual r = weight * M(cell) - value is emitted with
/// its pose-Jacobian row (the weight is held fixed within a linearization,
/// so the row is just the projected occupancy gradient chain).
inline ResidualSystem assemble_system(const std::vector<Submap>& submaps,
                                      const std::vector<Pose2>& frames,
                                      const GridLayout& layout,
                                      const Grid2D& global_hits, double eps_hit) {
  if (submaps.empty()) throw InputError("assemble: no submaps");
  if (submaps.size() != frames.size())
    throw InputError("assemble: frame count must match submap count");
  if (!(global_hits.layout == layout))
    throw InputError("assemble: global hit map layout mismatch");

  ResidualSystem sys;
  sys.n_submaps = static_cast<int>(submaps.size());
  sys.cell_dense.assign(layout.cell_count(), -1);
  const auto framed = detail::frame_submaps(submaps, frames);

  for (int cy = 0; cy < layout.height; ++cy) {
    for (int cx = 0; cx < layout.width; ++cx) {
      const std::size_t flat = layout.flat(cx, cy);
      const double hit_total = global_hits.values[flat];
      if (!(hit_total > 0.0)) continue;

      const Eigen::Vector2d w = layout.cell_to_world(cx, cy);
      const int start = static_cast<int>(sys.residual_count());
      double wsq = 0.0;
      double wval = 0.0;
      for (std::size_t i = 0; i < submaps.size(); ++i) {
        const detail::FramedSubmap& f = framed[i];
        const Eigen::Vector2d q = (f.rot * (w - f.t) - f.origin) * f.inv_res;
        const auto patch = detail::make_patch(submaps[i].hits.layout, q);
        if (!patch) continue;
        const double n = detail::patch_value(submaps[i].hits, *patch);
        if (!(n > eps_hit)) continue;

        const GridSample occ = detail::patch_sample(submaps[i].occupancy, *patch);
        const double omega = n / hit_total;
        Eigen::Matrix<double, 1, 3> row = Eigen::Matrix<double, 1, 3>::Zero();
        if (i > 0)
          row = -(occ.gradient.transpose() * f.inv_res) *
                dworld_to_local_dpose(frames[i], w);

        sys.submap_of.push_back(static_cast<int>(i));
        sys.weight.push_back(omega);
        sys.value.push_back(occ.value);
        sys.pose_jacobian.push_back(row);
        wsq += omega * omega;
        wval += omega * occ.value;
      }
      if (static_cast<int>(sys.residual_count()) == start) continue;

      const int dense = static_cast<int>(sys.observed_cells());
      sys.cell_dense[flat] = dense;
      sys.cell_global.push_back(static_cast<std::int64_t>(flat));
      sys.first_residual.push_back(start);
      sys.weight_sq_sum.push_back(wsq);
      sys.weighted_value_sum.push_back(wval);
      for (std::size_t r = static_cast<std::size_t>(start); r < sys.residual_count(); ++r)
        sys.cell_of.push_back(dense);
    }
  }
  sys.first_residual.push_back(static_cast<int>(sys.residual_count()));

  if (sys.observed_cells() == 0)
    throw NumericalError("assemble: no observed global cells (submaps do not overlap the layout)");
  for (std::size_t r = 0; r < sys.residual_count(); ++r)
    if (!std::isfinite(sys.value[r]) || !std::isfinite(sys.weight[r]) ||
        !sys.pose_jacobian[r].allFinite())
      throw NumericalError("assemble: non-finite residual data");
  return sys;
}

inline ResidualSystem assemble(const JoinProblem& problem,
                               double eps_hit = JoinOptions{}.eps_hit) {
  return assemble_system(problem.submaps, problem.frames, problem.global_layout,
                         problem.global_hits, eps_hit);
}

/// Solves the reduced pose system: eliminating the map block (whose Gram
/// matrix is diagonal because each residual touches a single global cell)
/// leaves a dense symmetric system over frames 1..n-1, accumulated per
/// observed cell as a block-diagonal term minus a weighted rank-1
/// correction. Returns the stacked (dx, dy, dtheta) increments; empty for
/// a single-submap problem.
inline Eigen::VectorXd solve_pose_increment(const ResidualSystem& sys) {
  const int blocks = sys.n_submaps - 1;
  if (blocks <= 0) return Eigen::VectorXd();

  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(3 * blocks, 3 * blocks);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(3 * blocks);

  std::vector<int> touched;
  std::vector<Eigen::Vector3d> wcol;
  touched.reserve(static_cast<std::size_t>(sys.n_submaps));
  wcol.reserve(static_cast<std::size_t>(sys.n_submaps));

  for (std::size_t c = 0; c < sys.observed_cells(); ++c) {
    touched.clear();
    wcol.clear();
    for (int r = sys.first_residual[c]; r < sys.first_residual[c + 1]; ++r) {
      const int i = sys.submap_of[static_cast<std::size_t>(r)];
      if (i == 0) continue;
      const auto& g = sys.pose_jacobian[static_cast<std::size_t>(r)];
      const double h = sys.value[static_cast<std::size_t>(r)];
      const int bi = i - 1;
      a.block<3, 3>(3 * bi, 3 * bi).noalias() += g.transpose() * g;
      b.segment<3>(3 * bi).noalias() += g.transpose() * h;
      touched.push_back(bi);
      wcol.push_back(sys.weight[static_cast<std::size_t>(r)] * g.transpose());
    }
    const double inv_v = 1.0 / sys.weight_sq_sum[c];
    const double s1 = sys.weighted_value_sum[c];
    for (std::size_t k = 0; k < touched.size(); ++k) {
      b.segment<3>(3 * touched[k]).noalias() -= wcol[k] * (s1 * inv_v);
      for (std::size_t l = 0; l < touched.size(); ++l)
        a.block<3, 3>(3 * touched[k], 3 * touched[l]).noalias() -=
            wcol[k] * inv_v * wcol[l].transpose();
    }
  }

  Eigen::LLT<Eigen::MatrixXd> llt(a);
  if (llt.info() != Eigen::Success) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a);
    std::ostringstream msg;
    msg << "degenerate geometry: reduced normal matrix is not positive definite"
        << " (smallest eigenvalue " << es.eigenvalues().minCoeff() << ")";
    throw NumericalError(msg.str());
  }
  return llt.solve(b);
}

/// Objective after eliminating the map in closed form: per cell, the
/// residual sum of squares at the cell's optimal occupancy value. This is
/// what the pose iteration drives down; it never reads any stored map.
inline double reduced_objective(const ResidualSystem& sys) {
  double total = 0.0;
  for (std::size_t c = 0; c < sys.observed_cells(); ++c) {
    const double best = sys.weighted_value_sum[c] / sys.weight_sq_sum[c];
    for (int r = sys.first_residual[c]; r < sys.first_residual[c + 1]; ++r) {
      const double e = sys.weight[static_cast<std::size_t>(r)] * best -
                       sys.value[static_cast<std::size_t>(r)];
      total += e * e;
    }
  }
  return total;
}

namespace detail {

inline void require_gauge(const std::vector<Pose2>& frames) {
  if (frames.empty()) throw InputError("join: no frames");
  if (frames.front().t.norm() > 1e-12 || std::abs(frames.front().theta) > 1e-12)
    throw InputError("join: frame 0 must be the identity (gauge)");
}

}  // namespace detail

/// Pose-only Gauss-Newton: per iteration, rebuild the global hit map at the
/// current frames, linearize, solve the reduced pose system, and apply the
/// additive update with angle normalization. Stops when the squared
/// increment norm drops below delta_tolerance or at the iteration cap.
/// Aborts if the reduced objective rises three iterations in a row.
/// problem.frames holds the final estimate on return.
inline GnReport pose_only_gn(JoinProblem& problem, const JoinOptions& opts = {}) {
  if (problem.submaps.empty()) throw InputError("join: no submaps");
  if (problem.submaps.size() != problem.frames.size())
    throw InputError("join: frame count must match submap count");
  detail::require_gauge(problem.frames);
  if (opts.max_iterations < 0) throw InputError("join: max_iterations must be >= 0");

  using clock = std::chrono::steady_clock;
  GnReport rep;
  rep.frame_trace.push_back(problem.frames);
  double last_delta_sq = std::numeric_limits<double>::infinity();
  double best_obj = std::numeric_limits<double>::infinity();
  int rising = 0;

  for (int k = 0;; ++k) {
    const auto t0 = clock::now();
    problem.global_hits = build_global_hit_map(problem, opts.eps_hit);
    const ResidualSystem sys = assemble(problem, opts.eps_hit);
    rep.assemble_seconds += std::chrono::duration<double>(clock::now() - t0).count();

    const double obj = reduced_objective(sys);
    if (!std::isfinite(obj))
      throw NumericalError("join: non-finite objective at iteration " + std::to_string(k));
    rep.objective_trace.push_back(obj);
    // Divergence means climbing clear of the best value seen, not the
    // harmless sub-0.1% chatter of refreshing the weights each iteration.
    rising = obj > best_obj * (1.0 + 1e-3) ? rising + 1 : 0;
    if (rising >= 3) {
      std::ostringstream msg;
      msg << "join: diverging, objective rose for 3 consecutive iterations ("
          << rep.objective_trace[rep.objective_trace.size() - 4] << " -> " << obj << ")";
      throw NumericalError(msg.str());
    }
    best_obj = std::min(best_obj, obj);

    if (k > 0 && last_delta_sq < opts.delta_tolerance) {
      rep.converged = true;
      break;
    }
    if (k >= opts.max_iterations) break;

    const auto t1 = clock::now();
    const Eigen::VectorXd delta = solve_pose_increment(sys);
    rep.solve_seconds += std::chrono::duration<double>(clock::now() - t1).count();

    for (std::size_t i = 1; i < problem.frames.size(); ++i) {
      const auto seg = delta.segment<3>(3 * (static_cast<int>(i) - 1));
      problem.frames[i].t.x() += seg(0);
      problem.frames[i].t.y() += seg(1);
      problem.frames[i].theta = normalize_angle(problem.frames[i].theta + seg(2));
    }
    last_delta_sq = delta.squaredNorm();
    rep.delta_norm_trace.push_back(std::sqrt(last_delta_sq));
    rep.frame_trace.push_back(problem.frames);
    rep.iterations = k + 1;
  }
  return rep;
}

/// Closed-form optimal map at the given frames: per observed cell, the
/// weighted value sum over the Gram diagonal. Unobserved cells stay at 0
/// (unknown). Rebuilds the hit map internally, so the caller need not keep
/// problem.global_hits current.
inline Grid2D recover_map(const JoinProblem& problem, const std::vector<Pose2>& frames,
                          double eps_hit = JoinOptions{}.eps_hit) {
  const Grid2D hits = build_global_hit_map_at(problem.submaps, frames,
                                              problem.global_layout, eps_hit);
  const ResidualSystem sys = assemble_system(problem.submaps, frames,
                                             problem.global_layout, hits, eps_hit);
  Grid2D map(problem.global_layout, 0.0);
  for (std::size_t c = 0; c < sys.observed_cells(); ++c)
    map.values[static_cast<std::size_t>(sys.cell_global[c])] =
        sys.weighted_value_sum[c] / sys.weight_sq_sum[c];
  return map;
}

/// Full weighted objective at explicit frames and an explicit map.
inline double objective(const JoinProblem& problem, const std::vector<Pose2>& frames,
                        const Grid2D& map, double eps_hit = JoinOptions{}.eps_hit) {
  if (!(map.layout == problem.global_layout))
    throw InputError("objective: map layout must match the global layout");
  const Grid2D hits = build_global_hit_map_at(problem.submaps, frames,
                                              problem.global_layout, eps_hit);
  const ResidualSystem sys = assemble_system(problem.submaps, frames,
                                             problem.global_layout, hits, eps_hit);
  double total = 0.0;
  for (std::size_t r = 0; r < sys.residual_count(); ++r) {
    const std::size_t flat =
        static_cast<std::size_t>(sys.cell_global[static_cast<std::size_t>(sys.cell_of[r])]);
    const double e = sys.weight[r] * map.values[flat] - sys.value[r];
    total += e * e;
  }
  return total;
}

/// Builds a ready-to-solve problem: layout from the initial frames, hit
/// map at those frames.
inline JoinProblem make_join_problem(std::vector<Submap> submaps,
                                     std::vector<Pose2> frames, double margin,
                                     double resolution,
                                     double eps_hit = JoinOptions{}.eps_hit) {
  JoinProblem problem;
  problem.submaps = std::move(submaps);
  problem.frames = std::move(frames);
  detail::require_gauge(problem.frames);
  problem.global_layout =
      compute_global_layout(problem.submaps, problem.frames, margin, resolution);
  problem.global_hits = build_global_hit_map(problem, eps_hit);
  return problem;
}

// Frames text file: one "id x y theta" line per frame, full precision.
inline void write_frames(const std::vector<Pose2>& frames, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw InputError("write_frames: cannot open for writing: " + path);
  char line[128];
  for (std::size_t i = 0; i < frames.size(); ++i) {
    std::snprintf(line, sizeof(line), "%zu %.17g %.17g %.17g\n", i,
                  frames[i].t.x(), frames[i].t.y(), frames[i].theta);
    out << line;
  }
  if (!out) throw InputError("write_frames: I/O failure writing " + path);
}

inline std::vector<Pose2> read_frames(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("frames file not found: " + path);
  std::vector<Pose2> frames;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ls(line);
    std::size_t id = 0;
    Pose2 pose;
    ls >> id >> pose.t.x() >> pose.t.y() >> pose.theta;
    if (ls.fail() || id != frames.size())
      throw InputError("read_frames: malformed or out-of-order line " +
                       std::to_string(line_no) + " of " + path);
    frames.push_back(pose);
  }
  if (frames.empty()) throw InputError("read_frames: no frames in " + path);
  return frames;
}

/// Report JSON with keys iterations, objective_trace, delta_norm_trace,
/// converged, assemble_seconds, solve_seconds.
inline void write_report(const GnReport& rep, const std::string& path) {
  nlohmann::json j = {
      {"iterations", rep.iterations},
      {"objective_trace", rep.objective_trace},
      {"delta_norm_trace", rep.delta_norm_trace},
      {"converged", rep.converged},
      {"assemble_seconds", rep.assemble_seconds},
      {"solve_seconds", rep.solve_seconds},
  };
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw InputError("write_report: cannot open for writing: " + path);
  out << j.dump(2) << "\n";
}

}  // namespace gridjoin
