// SPDX-License-Identifier: Apache-2.0
// Test-only reference computations. Nothing here calls the code path it is
// used to check.
#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "posekit/geometry.hpp"

namespace posekit::oracle {

/// Central finite-difference gradient of f at x.
inline Eigen::VectorXd fd_gradient(
    const std::function<double(const Eigen::VectorXd &)> &f,
    const Eigen::VectorXd &x, double h = 1e-5) {
  Eigen::VectorXd g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Eigen::VectorXd xp = x, xm = x;
    xp(i) += h;
    xm(i) -= h;
    g(i) = (f(xp) - f(xm)) / (2.0 * h);
  }
  return g;
}

/// Max over components of |a - b| / max(|b|, floor).
inline double relative_error(const Eigen::VectorXd &a, const Eigen::VectorXd &b,
                             double floor = 1.0) {
  double e = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i)
    e = std::max(e, std::abs(a(i) - b(i)) / std::max(std::abs(b(i)), floor));
  return e;
}

/// Rodrigues' formula, written out independently of Eigen::AngleAxis.
inline Mat3 axis_angle(const Vec3 &axis, double angle) {
  const Vec3 k = axis.normalized();
  Mat3 kx;
  kx << 0, -k.z(), k.y(), k.z(), 0, -k.x(), -k.y(), k.x(), 0;
  return Mat3::Identity() + std::sin(angle) * kx +
         (1.0 - std::cos(angle)) * kx * kx;
}

template <typename Rng> Mat3 random_rotation(Rng &rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::Quaterniond q(n(rng), n(rng), n(rng), n(rng));
  q.normalize();
  return q.toRotationMatrix();
}

/// Overlap length of two 1D intervals given by center and full extent.
inline double interval_overlap(double c1, double e1, double c2, double e2) {
  const double lo = std::max(c1 - 0.5 * e1, c2 - 0.5 * e2);
  const double hi = std::min(c1 + 0.5 * e1, c2 + 0.5 * e2);
  return std::max(0.0, hi - lo);
}

/// Closed-form IoU of two axis-aligned boxes (R = I).
inline double axis_aligned_iou(const Vec3 &t1, const Vec3 &s1, const Vec3 &t2,
                               const Vec3 &s2) {
  double inter = 1.0;
  for (int i = 0; i < 3; ++i)
    inter *= interval_overlap(t1[i], s1[i], t2[i], s2[i]);
  const double v1 = s1.prod(), v2 = s2.prod();
  return inter / (v1 + v2 - inter);
}

/// GIoU from corner coordinates, computed directly.
inline double giou_xyxy(double ax1, double ay1, double ax2, double ay2,
                        double bx1, double by1, double bx2, double by2) {
  const double iw = std::max(0.0, std::min(ax2, bx2) - std::max(ax1, bx1));
  const double ih = std::max(0.0, std::min(ay2, by2) - std::max(ay1, by1));
  const double inter = iw * ih;
  const double uni = (ax2 - ax1) * (ay2 - ay1) + (bx2 - bx1) * (by2 - by1) - inter;
  const double hull = (std::max(ax2, bx2) - std::min(ax1, bx1)) *
                      (std::max(ay2, by2) - std::min(ay1, by1));
  return inter / uni - (hull - uni) / hull;
}

/// Minimum over all injections of columns into rows, by enumerating row
/// permutations (independent of the library's depth-first oracle).
inline double brute_force_min_cost(const Eigen::MatrixXd &c) {
  std::vector<int> rows(c.rows());
  for (int i = 0; i < c.rows(); ++i)
    rows[i] = i;
  double best = std::numeric_limits<double>::infinity();
  do {
    double acc = 0.0;
    for (int j = 0; j < c.cols(); ++j)
      acc += c(rows[j], j);
    best = std::min(best, acc);
  } while (std::next_permutation(rows.begin(), rows.end()));
  return best;
}

} // namespace posekit::oracle
