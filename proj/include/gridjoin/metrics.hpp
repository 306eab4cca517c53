#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <vector>

#include "gridjoin/error.hpp"
#include "gridjoin/grid.hpp"
#include "gridjoin/se2.hpp"

namespace gridjoin {

struct PoseErrorSummary {
  double mae_trans = 0.0;
  double mae_rot = 0.0;
  double rmse_trans = 0.0;
  double rmse_rot = 0.0;
};

/// Translation and rotation errors between index-aligned pose lists, both
/// expressed in the same gauge frame. Rotation errors are wrapped before
/// taking magnitudes.
inline PoseErrorSummary pose_errors(const std::vector<Pose2>& estimated,
                                    const std::vector<Pose2>& truth) {
  if (estimated.empty() || estimated.size() != truth.size())
    throw InputError("pose_errors: pose lists must be nonempty and equal length");
  double sum_t = 0.0, sum_t2 = 0.0, sum_r = 0.0, sum_r2 = 0.0;
  for (std::size_t i = 0; i < estimated.size(); ++i) {
    const double dt = (estimated[i].t - truth[i].t).norm();
    const double dr = std::abs(normalize_angle(estimated[i].theta - truth[i].theta));
    sum_t += dt;
    sum_t2 += dt * dt;
    sum_r += dr;
    sum_r2 += dr * dr;
  }
  const double n = static_cast<double>(estimated.size());
  return {sum_t / n, sum_r / n, std::sqrt(sum_t2 / n), std::sqrt(sum_r2 / n)};
}

/// ROC AUC of the estimate's log-odds against binary labels from the truth
/// map (occupied iff > 0, free iff < 0). Cells whose truth is unknown
/// (exactly 0) or whose estimate is unobserved (exactly 0) are excluded.
/// Computed as the Mann-Whitney rank statistic with tied scores counted at
/// their average rank.
inline double map_auc(const Grid2D& estimate, const Grid2D& truth) {
  if (!(estimate.layout == truth.layout))
    throw InputError("map_auc: layouts must be identical");

  std::vector<std::pair<double, bool>> scored;
  for (std::size_t k = 0; k < truth.values.size(); ++k) {
    const double t = truth.values[k];
    const double e = estimate.values[k];
    if (t == 0.0 || e == 0.0) continue;
    scored.emplace_back(e, t > 0.0);
  }
  if (scored.empty()) throw InputError("map_auc: no scored cells");

  std::sort(scored.begin(), scored.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  std::size_t n_pos = 0;
  for (const auto& s : scored) n_pos += s.second ? 1 : 0;
  const std::size_t n_neg = scored.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) throw InputError("map_auc: single-class truth");

  double rank_sum_pos = 0.0;
  std::size_t i = 0;
  while (i < scored.size()) {
    std::size_t j = i;
    while (j < scored.size() && scored[j].first == scored[i].first) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // 1-based
    for (std::size_t k = i; k < j; ++k)
      if (scored[k].second) rank_sum_pos += avg_rank;
    i = j;
  }
  const double n1 = static_cast<double>(n_pos);
  return (rank_sum_pos - n1 * (n1 + 1.0) / 2.0) / (n1 * static_cast<double>(n_neg));
}

/// Fraction of predicted-occupied cells (estimate log-odds > 0) that are
/// truly occupied, over cells where the truth is known.
inline double map_precision(const Grid2D& estimate, const Grid2D& truth) {
  if (!(estimate.layout == truth.layout))
    throw InputError("map_precision: layouts must be identical");
  std::size_t predicted = 0, correct = 0;
  for (std::size_t k = 0; k < truth.values.size(); ++k) {
    const double t = truth.values[k];
    if (t == 0.0) continue;
    if (estimate.values[k] > 0.0) {
      ++predicted;
      if (t > 0.0) ++correct;
    }
  }
  if (predicted == 0) throw InputError("map_precision: no predicted-occupied cells");
  return static_cast<double>(correct) / static_cast<double>(predicted);
}

}  // namespace gridjoin
