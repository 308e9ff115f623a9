// SPDX-License-Identifier: Apache-2.0
/**
 * @file   losses.hpp
 * @brief  Training-loss terms with analytic gradients, and their weighted
 *         total over a matched set of queries.
 *
 * Terms: focal (classification), L1 (box and 2D center), GIoU (box),
 * L2 (depth and scale, linear meters), geodesic (6D rotation).
 */
#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "posekit/box2d.hpp"
#include "posekit/error.hpp"
#include "posekit/geometry.hpp"
#include "posekit/heads.hpp"
#include "posekit/matching.hpp"

namespace posekit {

/// A scalar loss and its gradient with respect to the inputs named by each
/// loss function.
struct LossValue {
  double value = 0.0;
  Eigen::VectorXd grad;
};

inline double sigmoid(double x) {
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                  : std::exp(x) / (1.0 + std::exp(x));
}

/// Sigmoid focal loss summed over classes. `target` < 0 means no object
/// (every class negative). Gradient is with respect to the logits.
inline LossValue focal_loss(const Eigen::VectorXd &probs, int target,
                            const FocalParams &f = {}) {
  constexpr double kLo = 1e-7;
  constexpr double kHi = 1.0 - 1e-7;
  LossValue out;
  out.grad = Eigen::VectorXd::Zero(probs.size());
  for (Eigen::Index k = 0; k < probs.size(); ++k) {
    const double p = std::clamp(probs(k), kLo, kHi);
    if (k == target) {
      const double q = 1.0 - p;
      out.value += -f.alpha * std::pow(q, f.gamma) * std::log(p);
      out.grad(k) =
          f.alpha * std::pow(q, f.gamma) * (f.gamma * p * std::log(p) - q);
    } else {
      const double q = 1.0 - p;
      out.value += -(1.0 - f.alpha) * std::pow(p, f.gamma) * std::log(q);
      out.grad(k) = -(1.0 - f.alpha) * std::pow(p, f.gamma) *
                    (f.gamma * q * std::log(q) - p);
    }
  }
  return out;
}

inline void check_same_size(const Eigen::VectorXd &a, const Eigen::VectorXd &b) {
  if (a.size() != b.size() || a.size() == 0)
    throw Error(ErrorKind::DimensionMismatch,
                "loss inputs must be non-empty and of equal length");
}

/// Mean absolute error; the subgradient is 0 at exact ties.
inline LossValue l1_loss(const Eigen::VectorXd &pred, const Eigen::VectorXd &gt) {
  check_same_size(pred, gt);
  const double n = static_cast<double>(pred.size());
  const Eigen::VectorXd d = pred - gt;
  LossValue out;
  out.value = d.cwiseAbs().sum() / n;
  out.grad = d.unaryExpr([n](double x) {
    return x > 0.0 ? 1.0 / n : (x < 0.0 ? -1.0 / n : 0.0);
  });
  return out;
}

inline LossValue l2_loss(const Eigen::VectorXd &pred, const Eigen::VectorXd &gt) {
  check_same_size(pred, gt);
  const double n = static_cast<double>(pred.size());
  const Eigen::VectorXd d = pred - gt;
  return {d.squaredNorm() / n, 2.0 * d / n};
}

/// 1 - GIoU(a, b); gradient with respect to (cx, cy, w, h) of `a`.
inline LossValue giou_loss(const BBox2D &a, const BBox2D &b) {
  // Work in corner form, then chain back to center-size.
  const double ax1 = a.x1(), ax2 = a.x2(), ay1 = a.y1(), ay2 = a.y2();
  const double bx1 = b.x1(), bx2 = b.x2(), by1 = b.y1(), by2 = b.y2();

  const double ix1 = std::max(ax1, bx1), ix2 = std::min(ax2, bx2);
  const double iy1 = std::max(ay1, by1), iy2 = std::min(ay2, by2);
  const double iw = std::max(0.0, ix2 - ix1);
  const double ih = std::max(0.0, iy2 - iy1);
  const double inter = iw * ih;
  const double area_a = (ax2 - ax1) * (ay2 - ay1);
  const double area_b = (bx2 - bx1) * (by2 - by1);
  const double uni = area_a + area_b - inter;
  const double hw = std::max(ax2, bx2) - std::min(ax1, bx1);
  const double hh = std::max(ay2, by2) - std::min(ay1, by1);
  const double hull = hw * hh;

  LossValue out;
  out.value = 2.0 - inter / uni - uni / hull;

  // d/d(ax1, ax2, ay1, ay2)
  Eigen::Vector4d d_inter = Eigen::Vector4d::Zero();
  if (iw > 0.0 && ih > 0.0) {
    if (ax1 > bx1) d_inter(0) = -ih;
    if (ax2 < bx2) d_inter(1) = ih;
    if (ay1 > by1) d_inter(2) = -iw;
    if (ay2 < by2) d_inter(3) = iw;
  }
  const Eigen::Vector4d d_area(-(ay2 - ay1), (ay2 - ay1), -(ax2 - ax1),
                               (ax2 - ax1));
  const Eigen::Vector4d d_uni = d_area - d_inter;
  Eigen::Vector4d d_hull = Eigen::Vector4d::Zero();
  if (ax1 < bx1) d_hull(0) = -hh;
  if (ax2 > bx2) d_hull(1) = hh;
  if (ay1 < by1) d_hull(2) = -hw;
  if (ay2 > by2) d_hull(3) = hw;

  const Eigen::Vector4d d_corner =
      -(d_inter * uni - inter * d_uni) / (uni * uni) -
      (d_uni * hull - uni * d_hull) / (hull * hull);
  // x1 = cx - w/2, x2 = cx + w/2 (same for y).
  out.grad.resize(4);
  out.grad << d_corner(0) + d_corner(1), d_corner(2) + d_corner(3),
      0.5 * (d_corner(1) - d_corner(0)), 0.5 * (d_corner(3) - d_corner(2));
  return out;
}

struct GeodesicLossValue : LossValue {
  /// Gradient is undefined at theta = 0 or pi; it is zeroed near those.
  bool singular = false;
};

/// Geodesic angle between the Gram-Schmidt rotation of `pred` and `gt`;
/// gradient with respect to (a1, a2).
inline GeodesicLossValue geodesic_loss(const Rotation6D &pred,
                                       const RotationMatrix &gt,
                                       const SymmetrySpec &sym = {}) {
  constexpr double kSingular = 1e-4;
  const RotationMatrix rp = rot6d_to_matrix(pred);
  const Mat3 &r = rp.matrix();

  // theta = acos(x) with x linear in R: x = tr(R^T M) / 2 - 1/2 for the
  // geodesic, x = tr(R^T M) for the axis angle of a continuous symmetry.
  Mat3 m;
  double x = 0.0;
  double dx_scale = 0.5;
  switch (sym.kind) {
  case SymmetrySpec::Kind::Continuous:
    m = gt.matrix() * sym.axis * sym.axis.transpose();
    x = (r.transpose() * m).trace();
    dx_scale = 1.0;
    break;
  case SymmetrySpec::Kind::Discrete: {
    m = gt.matrix();
    x = 0.5 * ((r.transpose() * m).trace() - 1.0);
    for (const Mat3 &s : sym.elements) {
      const Mat3 ms = gt.matrix() * s.transpose();
      const double xs = 0.5 * ((r.transpose() * ms).trace() - 1.0);
      if (xs > x) {
        x = xs;
        m = ms;
      }
    }
    break;
  }
  case SymmetrySpec::Kind::None:
    m = gt.matrix();
    x = 0.5 * ((r.transpose() * m).trace() - 1.0);
    break;
  }
  x = clamp_unit(x);

  GeodesicLossValue out;
  out.value = std::acos(x);
  out.grad = Eigen::VectorXd::Zero(6);
  if (out.value < kSingular || out.value > kPi - kSingular) {
    out.singular = true;
    return out;
  }
  const Mat3 g = (-dx_scale / std::sqrt(1.0 - x * x)) * m;

  // Backward through b3 = b1 x b2, b2 = normalize(a2 - (b1.a2) b1),
  // b1 = normalize(a1).
  const Vec3 b1 = r.col(0), b2 = r.col(1);
  const Vec3 g3 = g.col(2);
  Vec3 gb1 = g.col(0) + b2.cross(g3);
  const Vec3 gb2 = g.col(1) + g3.cross(b1);

  const Vec3 v = pred.a2 - b1.dot(pred.a2) * b1;
  const Vec3 gv = (gb2 - b2 * b2.dot(gb2)) / v.norm();
  const Vec3 ga2 = gv - b1 * b1.dot(gv);
  gb1 += -b1.dot(pred.a2) * gv - pred.a2 * b1.dot(gv);
  const Vec3 ga1 = (gb1 - b1 * b1.dot(gb1)) / pred.a1.norm();

  out.grad << ga1, ga2;
  return out;
}

// ---------------------------------------------------------------------------
// Total loss

struct LossWeights {
  double cls = 2.0;
  double bbox = 5.0;
  double iou = 2.0;
  double center2d = 5.0;
  double depth = 50.0;
  double rot = 5.0;
  double scale = 5.0;

  void validate() const {
    for (double w : {cls, bbox, iou, center2d, depth, rot, scale})
      if (!(w >= 0.0) || !std::isfinite(w))
        throw Error(ErrorKind::InvariantError,
                    "loss weights must be finite and non-negative");
  }
  bool operator==(const LossWeights &) const = default;
};

/// Ground-truth target of one instance, in the head's output space.
struct LossTarget {
  int category = 0;
  BBox2D box;
  NormalizedCenter center;
  double depth = 1.0;
  RotationMatrix rotation;
  Vec3 scale = Vec3::Ones();

  /// Center and depth from projecting the translation through `cam`.
  static LossTarget from_pose(int category, const Pose9D &pose,
                              const BBox2D &box, const CameraIntrinsics &cam) {
    const Projection pr = project_point(pose.translation, cam);
    return {category, box, pr.center, pr.depth, pose.rotation, pose.scale};
  }
};

struct LossOptions {
  FocalParams focal;
  /// Symmetry-aware rotation loss. Off by default for training.
  bool rotation_symmetry = false;
  /// Required when rotation_symmetry is set.
  SymmetryLookup symmetry;
};

struct LossBreakdown {
  double cls = 0.0;
  double bbox = 0.0;
  double iou = 0.0;
  double center2d = 0.0;
  double depth = 0.0;
  double rot = 0.0;
  double scale = 0.0;
  double total = 0.0;
  std::size_t pairs = 0;
  std::size_t unmatched = 0;
  /// Pairs whose rotation gradient hit the theta = 0 or pi singularity.
  std::size_t singular_rotations = 0;

  double weighted_sum(const LossWeights &w) const {
    return w.cls * cls + w.bbox * bbox + w.iou * iou + w.center2d * center2d +
           w.depth * depth + w.rot * rot + w.scale * scale;
  }
};

/// Weighted loss over matched (prediction, target) pairs, normalized by the
/// pair count. Unmatched predictions add focal loss toward "no object";
/// rotation and scale are read from the ground-truth class slice.
inline LossBreakdown total_loss(const std::vector<std::pair<int, int>> &pairs,
                                const std::vector<RawHeadOutput> &preds,
                                const std::vector<LossTarget> &targets,
                                const LossWeights &w,
                                const LossOptions &opt = {}) {
  if (pairs.empty())
    throw Error(ErrorKind::EmptyAssignment, "no matched pairs");
  std::vector<int> target_of(preds.size(), -1);
  for (const auto &[pi, ti] : pairs) {
    if (pi < 0 || static_cast<std::size_t>(pi) >= preds.size() || ti < 0 ||
        static_cast<std::size_t>(ti) >= targets.size())
      throw Error(ErrorKind::DimensionMismatch, "pair index out of range");
    target_of[pi] = ti;
  }

  LossBreakdown b;
  b.pairs = pairs.size();
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const RawHeadOutput &p = preds[i];
    p.validate();
    const Eigen::VectorXd probs = p.class_logits.unaryExpr(&sigmoid);
    const int t = target_of[i];
    b.cls += focal_loss(probs, t >= 0 ? targets[t].category : -1, opt.focal).value;
    if (t < 0)
      ++b.unmatched;
  }

  for (const auto &[pi, ti] : pairs) {
    const RawHeadOutput &p = preds[pi];
    const LossTarget &g = targets[ti];
    if (g.category < 0 || g.category >= p.num_classes())
      throw Error(ErrorKind::DimensionMismatch, "target class out of range");
    const auto pa = p.box.as_array();
    const auto ga = g.box.as_array();
    b.bbox += l1_loss(Eigen::Vector4d(pa[0], pa[1], pa[2], pa[3]),
                      Eigen::Vector4d(ga[0], ga[1], ga[2], ga[3]))
                  .value;
    b.iou += giou_loss(p.box, g.box).value;
    const NormalizedCenter u = recover_center(p.box, p.center_offset);
    b.center2d +=
        l1_loss(Eigen::Vector2d(u.x, u.y), Eigen::Vector2d(g.center.x, g.center.y))
            .value;
    b.depth += l2_loss(Eigen::VectorXd::Constant(1, p.depth),
                       Eigen::VectorXd::Constant(1, g.depth))
                   .value;
    const SymmetrySpec none;
    const SymmetrySpec &sym =
        opt.rotation_symmetry && opt.symmetry ? opt.symmetry(g.category) : none;
    const GeodesicLossValue rot = geodesic_loss(p.rot6d(g.category), g.rotation, sym);
    b.rot += rot.value;
    b.singular_rotations += rot.singular;
    b.scale += l2_loss(p.scale(g.category), g.scale).value;
  }

  const double n = static_cast<double>(pairs.size());
  for (double *term : {&b.cls, &b.bbox, &b.iou, &b.center2d, &b.depth, &b.rot,
                       &b.scale})
    *term /= n;
  b.total = b.weighted_sum(w);
  return b;
}

} // namespace posekit
