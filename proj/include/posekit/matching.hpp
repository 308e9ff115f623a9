// SPDX-License-Identifier: Apache-2.0
/**
 * @file   matching.hpp
 * @brief  Composite 2D + 3D matching cost and one-to-one assignment.
 *
 * Rows of a cost matrix are predictions (queries), columns are ground-truth
 * instances. Every column must be covered, so rows >= columns.
 */
#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <utility>
#include <vector>

#include "posekit/box2d.hpp"
#include "posekit/error.hpp"
#include "posekit/geometry.hpp"

namespace posekit {

struct CostWeights {
  double cls = 2.0;
  double bbox = 5.0;
  double iou = 2.0;
  double trans = 5.0;
  double rot = 2.0;

  void validate() const {
    for (double w : {cls, bbox, iou, trans, rot})
      if (!(w >= 0.0) || !std::isfinite(w))
        throw Error(ErrorKind::InvariantError,
                    "cost weights must be finite and non-negative");
    if (cls + bbox + iou + trans + rot <= 0.0)
      throw Error(ErrorKind::InvariantError,
                  "at least one cost weight must be positive");
  }
  CostWeights scaled(double k) const {
    return {cls * k, bbox * k, iou * k, trans * k, rot * k};
  }
  bool operator==(const CostWeights &) const = default;
};

/// Focal parameters shared by the matching cost and the focal loss.
struct FocalParams {
  double alpha = 0.25;
  double gamma = 2.0;
  bool operator==(const FocalParams &) const = default;
};

struct MatchCandidate {
  std::vector<double> class_probs;
  BBox2D box;
  Pose9D pose;
};

struct LabeledInstance {
  int category = 0;
  BBox2D box;
  Pose9D pose;
};

struct CostBreakdown {
  double cls = 0.0;
  double bbox = 0.0;
  double iou = 0.0;
  double trans = 0.0;
  double rot = 0.0;
  double total = 0.0;
};

using CostMatrix = Eigen::MatrixXd;

struct Assignment {
  /// (prediction, ground truth), ordered by ground-truth index.
  std::vector<std::pair<int, int>> pairs;
  std::vector<int> unmatched_predictions;
  double total_cost = 0.0;
};

/// pos - neg with pos = a (1-p)^g (-log p), neg = (1-a) p^g (-log(1-p)).
inline double focal_class_cost(double p, const FocalParams &f = {}) {
  constexpr double kEps = 1e-8;
  p = std::clamp(p, 0.0, 1.0);
  const double pos =
      f.alpha * std::pow(1.0 - p, f.gamma) * (-std::log(p + kEps));
  const double neg =
      (1.0 - f.alpha) * std::pow(p, f.gamma) * (-std::log(1.0 - p + kEps));
  return pos - neg;
}

inline double box_l1_distance(const BBox2D &a, const BBox2D &b) {
  return std::abs(a.cx - b.cx) + std::abs(a.cy - b.cy) +
         std::abs(a.w - b.w) + std::abs(a.h - b.h);
}

inline CostBreakdown pairwise_cost_breakdown(const MatchCandidate &pred,
                                             const LabeledInstance &gt,
                                             const CostWeights &w,
                                             const SymmetrySpec &sym,
                                             const FocalParams &focal = {}) {
  CostBreakdown c;
  const double p =
      gt.category >= 0 &&
              static_cast<std::size_t>(gt.category) < pred.class_probs.size()
          ? pred.class_probs[gt.category]
          : 0.0;
  c.cls = focal_class_cost(p, focal);
  c.bbox = box_l1_distance(pred.box, gt.box);
  c.iou = -generalized_box_iou(pred.box, gt.box);
  c.trans = (pred.pose.translation - gt.pose.translation).norm();
  c.rot = symmetry_aware_rot_distance(pred.pose.rotation, gt.pose.rotation, sym);
  c.total = w.cls * c.cls + w.bbox * c.bbox + w.iou * c.iou +
            w.trans * c.trans + w.rot * c.rot;
  return c;
}

inline double pairwise_cost(const MatchCandidate &pred,
                            const LabeledInstance &gt, const CostWeights &w,
                            const SymmetrySpec &sym,
                            const FocalParams &focal = {}) {
  return pairwise_cost_breakdown(pred, gt, w, sym, focal).total;
}

/// Symmetry of a ground-truth category; used to pick C_rot per column.
using SymmetryLookup = std::function<const SymmetrySpec &(int category)>;

inline CostMatrix build_cost_matrix(const std::vector<MatchCandidate> &preds,
                                    const std::vector<LabeledInstance> &gts,
                                    const CostWeights &w,
                                    const SymmetryLookup &sym,
                                    const FocalParams &focal = {}) {
  if (preds.empty() || gts.empty())
    throw Error(ErrorKind::DimensionMismatch,
                "cost matrix needs at least one prediction and one target");
  CostMatrix m(preds.size(), gts.size());
  for (std::size_t j = 0; j < gts.size(); ++j) {
    const SymmetrySpec &s = sym(gts[j].category);
    for (std::size_t i = 0; i < preds.size(); ++i)
      m(i, j) = pairwise_cost(preds[i], gts[j], w, s, focal);
  }
  return m;
}

inline CostMatrix build_cost_matrix(const std::vector<MatchCandidate> &preds,
                                    const std::vector<LabeledInstance> &gts,
                                    const CostWeights &w,
                                    const SymmetrySpec &sym,
                                    const FocalParams &focal = {}) {
  return build_cost_matrix(
      preds, gts, w, [&sym](int) -> const SymmetrySpec & { return sym; },
      focal);
}

namespace detail {

inline void check_assignable(const CostMatrix &cost) {
  if (cost.cols() == 0)
    throw Error(ErrorKind::InfeasibleMatrix, "cost matrix has no columns");
  if (cost.rows() < cost.cols())
    throw Error(ErrorKind::InfeasibleMatrix,
                "fewer predictions than ground-truth instances");
  if (!cost.allFinite())
    throw Error(ErrorKind::InfeasibleMatrix, "cost matrix has non-finite entries");
}

inline Assignment finish(const CostMatrix &cost,
                         const std::vector<int> &row_of_col) {
  Assignment a;
  std::vector<bool> used(cost.rows(), false);
  for (int j = 0; j < static_cast<int>(row_of_col.size()); ++j) {
    a.pairs.emplace_back(row_of_col[j], j);
    used[row_of_col[j]] = true;
    a.total_cost += cost(row_of_col[j], j);
  }
  for (int i = 0; i < cost.rows(); ++i)
    if (!used[i])
      a.unmatched_predictions.push_back(i);
  return a;
}

} // namespace detail

/// Minimum-cost assignment covering every column (Hungarian method with
/// shortest augmenting paths, O(cols^2 * rows)).
inline Assignment solve_assignment(const CostMatrix &cost) {
  detail::check_assignable(cost);
  // Columns act as the "workers" of the classic formulation: each is
  // assigned one distinct row.
  const int n = static_cast<int>(cost.cols());
  const int m = static_cast<int>(cost.rows());
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<int> p(m + 1, 0), way(m + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(m + 1, inf);
    std::vector<bool> used(m + 1, false);
    do {
      used[j0] = true;
      const int i0 = p[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= m; ++j) {
        if (used[j])
          continue;
        const double cur = cost(j - 1, i0 - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> row_of_col(n, -1);
  for (int j = 1; j <= m; ++j)
    if (p[j] != 0)
      row_of_col[p[j] - 1] = j - 1;
  return detail::finish(cost, row_of_col);
}

/// Exhaustive minimum over all injections of columns into rows.
inline Assignment brute_force_assignment(const CostMatrix &cost) {
  if (cost.cols() > 8)
    throw Error(ErrorKind::TooLarge, "brute force limited to 8 columns");
  detail::check_assignable(cost);
  const int n = static_cast<int>(cost.cols());
  const int m = static_cast<int>(cost.rows());
  std::vector<int> current(n, -1), best;
  std::vector<bool> used(m, false);
  double best_cost = std::numeric_limits<double>::infinity();
  std::function<void(int, double)> recurse = [&](int col, double acc) {
    if (col == n) {
      if (acc < best_cost) {
        best_cost = acc;
        best = current;
      }
      return;
    }
    for (int r = 0; r < m; ++r) {
      if (used[r])
        continue;
      used[r] = true;
      current[col] = r;
      recurse(col + 1, acc + cost(r, col));
      used[r] = false;
    }
  };
  recurse(0, 0.0);
  return detail::finish(cost, best);
}

} // namespace posekit
