// SPDX-License-Identifier: Apache-2.0
/**
 * @file   iou3d.hpp
 * @brief  Exact IoU of oriented 3D cuboids by convex half-space clipping.
 *
 * The intersection of two cuboids is the first cuboid clipped successively
 * by the six face half-spaces of the second. A sampling estimator is kept
 * alongside as an independent check.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include "posekit/geometry.hpp"

namespace posekit {

/// Closed half-space {x : normal . x <= offset}.
struct HalfSpace {
  Vec3 normal;
  double offset = 0.0;
};

/// Convex polytope as a vertex list plus outward-oriented (counter-clockwise
/// seen from outside) faces. Zero vertices is the empty polytope.
struct ConvexPolytope {
  std::vector<Vec3> vertices;
  std::vector<std::vector<int>> faces;

  bool empty() const { return vertices.empty() || faces.empty(); }

  static ConvexPolytope from_pose(const Pose9D &pose) {
    ConvexPolytope p;
    const Corners c = cuboid_corners(pose);
    p.vertices.assign(c.begin(), c.end());
    // Corner index bits: x = 4, y = 2, z = 1.
    p.faces = {{0, 1, 3, 2}, {4, 6, 7, 5}, {0, 4, 5, 1},
               {2, 3, 7, 6}, {0, 2, 6, 4}, {1, 5, 7, 3}};
    // A negative determinant would flip every face; cuboid_corners keeps R
    // proper so the table above is always outward.
    return p;
  }

  static ConvexPolytope unit_cube() {
    Pose9D pose;
    pose.translation = Vec3::Constant(0.5);
    return from_pose(pose);
  }
};

namespace detail {

inline void order_cap(std::vector<int> &idx, const std::vector<Vec3> &verts,
                      const Vec3 &normal) {
  Vec3 centroid = Vec3::Zero();
  for (int i : idx)
    centroid += verts[i];
  centroid /= static_cast<double>(idx.size());
  const Vec3 u = normal.unitOrthogonal();
  const Vec3 v = normal.cross(u);
  std::vector<std::pair<double, int>> keyed;
  keyed.reserve(idx.size());
  for (int i : idx) {
    const Vec3 d = verts[i] - centroid;
    keyed.emplace_back(std::atan2(d.dot(v), d.dot(u)), i);
  }
  std::sort(keyed.begin(), keyed.end());
  idx.clear();
  for (const auto &[angle, i] : keyed)
    idx.push_back(i);
}

} // namespace detail

/// p intersected with h. Convexity is preserved; the result may be empty.
inline ConvexPolytope clip_polytope(const ConvexPolytope &p,
                                    const HalfSpace &h) {
  if (p.empty())
    return {};
  const std::size_t n = p.vertices.size();
  std::vector<double> dist(n);
  double scale = 1.0;
  for (std::size_t i = 0; i < n; ++i) {
    dist[i] = h.normal.dot(p.vertices[i]) - h.offset;
    scale = std::max(scale, std::abs(dist[i]));
  }
  const double eps = 1e-12 * scale;
  bool any_out = false;
  bool any_in = false;
  for (double &d : dist) {
    if (std::abs(d) <= eps)
      d = 0.0;
    any_out |= d > 0.0;
    any_in |= d < 0.0;
  }
  if (!any_out)
    return p;
  if (!any_in)
    return {};

  ConvexPolytope out;
  std::vector<int> remap(n, -1);
  std::vector<int> on_plane;
  for (std::size_t i = 0; i < n; ++i) {
    if (dist[i] <= 0.0) {
      remap[i] = static_cast<int>(out.vertices.size());
      out.vertices.push_back(p.vertices[i]);
      if (dist[i] == 0.0)
        on_plane.push_back(remap[i]);
    }
  }
  // Each cut edge is shared by two faces; a short list beats a map here.
  std::vector<std::pair<std::pair<int, int>, int>> edge_vertex;
  auto crossing = [&](int a, int b) {
    const std::pair<int, int> key{std::min(a, b), std::max(a, b)};
    for (const auto &[k, id] : edge_vertex)
      if (k == key)
        return id;
    const double t = dist[a] / (dist[a] - dist[b]);
    Vec3 x = p.vertices[a] + t * (p.vertices[b] - p.vertices[a]);
    const int id = static_cast<int>(out.vertices.size());
    out.vertices.push_back(x);
    on_plane.push_back(id);
    edge_vertex.emplace_back(key, id);
    return id;
  };

  bool face_on_plane = false;
  for (const auto &face : p.faces) {
    std::vector<int> clipped;
    const std::size_t m = face.size();
    for (std::size_t k = 0; k < m; ++k) {
      const int a = face[k];
      const int b = face[(k + 1) % m];
      if (dist[a] <= 0.0)
        clipped.push_back(remap[a]);
      if ((dist[a] < 0.0 && dist[b] > 0.0) || (dist[a] > 0.0 && dist[b] < 0.0))
        clipped.push_back(crossing(a, b));
    }
    if (clipped.size() < 3)
      continue;
    bool all_on = true;
    for (int a : face)
      all_on &= dist[a] == 0.0;
    face_on_plane |= all_on;
    out.faces.push_back(std::move(clipped));
  }

  std::sort(on_plane.begin(), on_plane.end());
  on_plane.erase(std::unique(on_plane.begin(), on_plane.end()),
                 on_plane.end());
  if (!face_on_plane && on_plane.size() >= 3) {
    detail::order_cap(on_plane, out.vertices, h.normal.normalized());
    out.faces.push_back(std::move(on_plane));
  }
  if (out.faces.size() < 4)
    return {};

  // Compact: drop vertices no face references.
  std::vector<int> used(out.vertices.size(), -1);
  ConvexPolytope compact;
  for (auto &face : out.faces)
    for (int &i : face) {
      if (used[i] < 0) {
        used[i] = static_cast<int>(compact.vertices.size());
        compact.vertices.push_back(out.vertices[i]);
      }
      i = used[i];
    }
  compact.faces = std::move(out.faces);
  return compact;
}

/// Volume by signed tetrahedra fanned from the vertex centroid.
inline double polytope_volume(const ConvexPolytope &p) {
  if (p.empty())
    return 0.0;
  Vec3 c = Vec3::Zero();
  for (const Vec3 &v : p.vertices)
    c += v;
  c /= static_cast<double>(p.vertices.size());
  double vol = 0.0;
  for (const auto &face : p.faces) {
    const Vec3 a = p.vertices[face[0]] - c;
    for (std::size_t k = 1; k + 1 < face.size(); ++k) {
      const Vec3 b = p.vertices[face[k]] - c;
      const Vec3 d = p.vertices[face[k + 1]] - c;
      vol += a.dot(b.cross(d));
    }
  }
  return std::max(0.0, vol / 6.0);
}

/// The six outward face half-spaces of a cuboid.
inline std::array<HalfSpace, 6> cuboid_halfspaces(const Pose9D &pose) {
  std::array<HalfSpace, 6> hs;
  for (int axis = 0; axis < 3; ++axis) {
    const Vec3 n = pose.rotation.column(axis);
    const double c = n.dot(pose.translation);
    const double half = 0.5 * pose.scale[axis];
    hs[2 * axis] = {n, c + half};
    hs[2 * axis + 1] = {-n, -c + half};
  }
  return hs;
}

inline double cuboid_volume(const Pose9D &pose) {
  return pose.scale.x() * pose.scale.y() * pose.scale.z();
}

inline double intersection_volume(const Pose9D &a, const Pose9D &b) {
  const double reach = 0.5 * (a.scale.norm() + b.scale.norm());
  if ((a.translation - b.translation).norm() > reach)
    return 0.0;
  ConvexPolytope p = ConvexPolytope::from_pose(a);
  for (const HalfSpace &h : cuboid_halfspaces(b)) {
    p = clip_polytope(p, h);
    if (p.empty())
      return 0.0;
  }
  return polytope_volume(p);
}

inline double iou_3d(const Pose9D &a, const Pose9D &b) {
  const double va = cuboid_volume(a);
  const double vb = cuboid_volume(b);
  if (!(va > 0.0) || !(vb > 0.0))
    return 0.0;
  const double inter = std::min({intersection_volume(a, b), va, vb});
  const double uni = va + vb - inter;
  return uni > 0.0 ? std::clamp(inter / uni, 0.0, 1.0) : 0.0;
}

struct SymmetricIouOptions {
  /// Rotations of the second cuboid about its symmetry axis, over 2*pi.
  int steps = 20;
  /// Golden-section refinement around the best discrete step.
  bool refine = true;
};

/// IoU maximized over the symmetry group of `b`'s category.
inline double iou_3d_symmetric(const Pose9D &a, const Pose9D &b,
                               const SymmetrySpec &sym,
                               const SymmetricIouOptions &opt = {}) {
  double best = iou_3d(a, b);
  switch (sym.kind) {
  case SymmetrySpec::Kind::None:
    return best;
  case SymmetrySpec::Kind::Discrete: {
    for (const Mat3 &s : sym.elements) {
      Pose9D r = b;
      r.rotation = RotationMatrix::from_matrix(b.rotation.matrix() * s, 1e-6);
      best = std::max(best, iou_3d(a, r));
    }
    return best;
  }
  case SymmetrySpec::Kind::Continuous:
    break;
  }
  if (best == 0.0 &&
      (a.translation - b.translation).norm() >
          0.5 * (a.scale.norm() + b.scale.norm()))
    return 0.0;

  auto rotated = [&](double angle) {
    Pose9D r = b;
    r.rotation = b.rotation * RotationMatrix::about_axis(sym.axis, angle);
    return iou_3d(a, r);
  };
  const int steps = std::max(1, opt.steps);
  const double step = 2.0 * kPi / steps;
  double best_angle = 0.0;
  for (int k = 1; k < steps; ++k) {
    const double v = rotated(step * k);
    if (v > best) {
      best = v;
      best_angle = step * k;
    }
  }
  if (!opt.refine || best == 0.0)
    return best;

  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double lo = best_angle - step;
  double hi = best_angle + step;
  double x1 = hi - inv_phi * (hi - lo);
  double x2 = lo + inv_phi * (hi - lo);
  double f1 = rotated(x1);
  double f2 = rotated(x2);
  while (hi - lo > 1e-7) {
    if (f1 < f2) {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + inv_phi * (hi - lo);
      f2 = rotated(x2);
    } else {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - inv_phi * (hi - lo);
      f1 = rotated(x1);
    }
  }
  return std::max({best, f1, f2});
}

inline bool point_in_cuboid(const Pose9D &pose, const Vec3 &x) {
  const Vec3 local = pose.rotation.matrix().transpose() * (x - pose.translation);
  return std::abs(local.x()) <= 0.5 * pose.scale.x() &&
         std::abs(local.y()) <= 0.5 * pose.scale.y() &&
         std::abs(local.z()) <= 0.5 * pose.scale.z();
}

/// Sampling estimate of the IoU over the axis-aligned bound of both cuboids.
/// Deterministic given the seed.
inline double iou_3d_monte_carlo(const Pose9D &a, const Pose9D &b,
                                 std::uint64_t samples, std::uint64_t seed) {
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = -lo;
  for (const Pose9D *p : {&a, &b})
    for (const Vec3 &c : cuboid_corners(*p)) {
      lo = lo.cwiseMin(c);
      hi = hi.cwiseMax(c);
    }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ux(lo.x(), hi.x());
  std::uniform_real_distribution<double> uy(lo.y(), hi.y());
  std::uniform_real_distribution<double> uz(lo.z(), hi.z());
  std::uint64_t in_a = 0, in_b = 0, in_both = 0;
  for (std::uint64_t i = 0; i < samples; ++i) {
    const Vec3 x(ux(rng), uy(rng), uz(rng));
    const bool ia = point_in_cuboid(a, x);
    const bool ib = point_in_cuboid(b, x);
    in_a += ia;
    in_b += ib;
    in_both += ia && ib;
  }
  const std::uint64_t uni = in_a + in_b - in_both;
  return uni == 0 ? 0.0
                  : static_cast<double>(in_both) / static_cast<double>(uni);
}

} // namespace posekit
