#pragma once

#include <Eigen/Core>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <vector>

#include "gridjoin/error.hpp"
#include "gridjoin/join.hpp"

namespace gridjoin {

struct FullGnStep {
  Eigen::VectorXd pose_delta;  // stacked increments for frames 1..n-1
  Eigen::VectorXd map_delta;   // one entry per observed cell, dense order
};

/// Current map values at the observed cells (dense order), taken from the
/// problem's initial_map when present, otherwise zeros.
inline Eigen::VectorXd observed_map_values(const JoinProblem& problem,
                                           const ResidualSystem& sys) {
  Eigen::VectorXd m = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(sys.observed_cells()));
  if (problem.initial_map) {
    if (!(problem.initial_map->layout == problem.global_layout))
      throw InputError("observed_map_values: initial map layout mismatch");
    for (std::size_t c = 0; c < sys.observed_cells(); ++c)
      m(static_cast<Eigen::Index>(c)) =
          problem.initial_map->values[static_cast<std::size_t>(sys.cell_global[c])];
  }
  return m;
}

/// One Gauss-Newton step of the coupled pose+map system, solved as a
/// single sparse symmetric factorization of the full normal equations
/// (pose block, map Gram diagonal, and coupling assembled explicitly).
/// Unlike the reduced path this reads the current map values. Test oracle
/// and benchmark baseline only.
inline FullGnStep full_gn_step(const ResidualSystem& sys,
                               const Eigen::VectorXd& map_values,
                               std::size_t max_cells = (std::size_t{1} << 20)) {
  const std::size_t m = sys.observed_cells();
  if (m > max_cells)
    throw InputError("full_gn_step: observed cell count exceeds the memory guard");
  if (map_values.size() != static_cast<Eigen::Index>(m))
    throw InputError("full_gn_step: map value count must match observed cells");

  const int pose_vars = 3 * (sys.n_submaps - 1);
  const Eigen::Index dim = pose_vars + static_cast<Eigen::Index>(m);

  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(sys.residual_count() * 13);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(dim);

  for (std::size_t r = 0; r < sys.residual_count(); ++r) {
    const int i = sys.submap_of[r];
    const int c = sys.cell_of[r];
    const double omega = sys.weight[r];
    const double residual = omega * map_values(c) - sys.value[r];
    const Eigen::Index col_m = pose_vars + c;

    triplets.emplace_back(col_m, col_m, omega * omega);
    rhs(col_m) -= omega * residual;

    if (i > 0) {
      const auto& g = sys.pose_jacobian[r];
      const Eigen::Index base = 3 * (i - 1);
      for (int a = 0; a < 3; ++a) {
        for (int b = 0; b < 3; ++b)
          triplets.emplace_back(base + a, base + b, g(a) * g(b));
        triplets.emplace_back(base + a, col_m, g(a) * omega);
        triplets.emplace_back(col_m, base + a, g(a) * omega);
        rhs(base + a) -= g(a) * residual;
      }
    }
  }

  Eigen::SparseMatrix<double> normal(dim, dim);
  normal.setFromTriplets(triplets.begin(), triplets.end());

  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver;
  solver.compute(normal);
  if (solver.info() != Eigen::Success)
    throw NumericalError("full_gn_step: factorization of the full normal equations failed");
  const Eigen::VectorXd delta = solver.solve(rhs);
  if (solver.info() != Eigen::Success)
    throw NumericalError("full_gn_step: solve of the full normal equations failed");

  FullGnStep step;
  step.pose_delta = delta.head(pose_vars);
  step.map_delta = delta.tail(static_cast<Eigen::Index>(m));
  return step;
}

}  // namespace gridjoin
