// SPDX-License-Identifier: Apache-2.0
/**
 * @file   box2d.hpp
 * @brief  IoU and generalized IoU of normalized center-size boxes.
 */
#pragma once

#include <algorithm>

#include "posekit/geometry.hpp"

namespace posekit {

struct BoxOverlap {
  double intersection = 0.0;
  double union_area = 0.0;
  double hull_area = 0.0;

  double iou() const {
    return union_area > 0.0 ? intersection / union_area : 0.0;
  }
  /// IoU minus the fraction of the enclosing box not covered by the union.
  double giou() const {
    if (!(hull_area > 0.0))
      return iou();
    return iou() - (hull_area - union_area) / hull_area;
  }
};

inline BoxOverlap box_overlap(const BBox2D &a, const BBox2D &b) {
  const double iw = std::max(0.0, std::min(a.x2(), b.x2()) -
                                      std::max(a.x1(), b.x1()));
  const double ih = std::max(0.0, std::min(a.y2(), b.y2()) -
                                      std::max(a.y1(), b.y1()));
  BoxOverlap o;
  o.intersection = iw * ih;
  o.union_area = a.area() + b.area() - o.intersection;
  o.hull_area = (std::max(a.x2(), b.x2()) - std::min(a.x1(), b.x1())) *
                (std::max(a.y2(), b.y2()) - std::min(a.y1(), b.y1()));
  return o;
}

inline double box_iou(const BBox2D &a, const BBox2D &b) {
  return box_overlap(a, b).iou();
}

inline double generalized_box_iou(const BBox2D &a, const BBox2D &b) {
  return box_overlap(a, b).giou();
}

} // namespace posekit
