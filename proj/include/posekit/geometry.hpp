// SPDX-License-Identifier: Apache-2.0
/**
 * @file   geometry.hpp
 * @brief  9D pose model, rotation parameterizations and pinhole camera math.
 *
 * Poses are (R, t, s): a proper rotation, a camera-frame translation in
 * meters and a per-axis metric extent in meters. The object cuboid spans
 * t + R * diag(s / 2) * (+-1, +-1, +-1). Angles are radians throughout.
 */
#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <utility>
#include <vector>

#include "posekit/error.hpp"

namespace posekit {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

inline constexpr double kPi = std::numbers::pi;

inline double deg_to_rad(double deg) { return deg * kPi / 180.0; }
inline double rad_to_deg(double rad) { return rad * 180.0 / kPi; }

/// Element of SO(3). Construction through `from_matrix` checks the
/// orthonormality and determinant invariants.
class RotationMatrix {
public:
  static constexpr double kDefaultTolerance = 1e-9;

  RotationMatrix() : m_(Mat3::Identity()) {}

  static RotationMatrix identity() { return RotationMatrix(); }

  static RotationMatrix from_matrix(const Mat3 &m,
                                    double tol = kDefaultTolerance) {
    if (!is_rotation(m, tol))
      throw Error(ErrorKind::InvariantError,
                  "matrix is not a proper rotation");
    return RotationMatrix(m, Unchecked{});
  }

  /// Rotation by `angle` radians about `axis` (need not be unit length).
  static RotationMatrix about_axis(const Vec3 &axis, double angle) {
    const double n = axis.norm();
    if (!(n > 0.0))
      throw Error(ErrorKind::DegenerateInput, "rotation axis has zero norm");
    return RotationMatrix(Eigen::AngleAxisd(angle, axis / n).toRotationMatrix(),
                          Unchecked{});
  }

  static bool is_rotation(const Mat3 &m, double tol = kDefaultTolerance) {
    if (!m.allFinite())
      return false;
    const double ortho =
        (m.transpose() * m - Mat3::Identity()).cwiseAbs().maxCoeff();
    return ortho < tol && std::abs(m.determinant() - 1.0) < tol;
  }

  const Mat3 &matrix() const noexcept { return m_; }
  Vec3 column(int i) const { return m_.col(i); }

  RotationMatrix operator*(const RotationMatrix &o) const {
    return RotationMatrix(m_ * o.m_, Unchecked{});
  }
  Vec3 operator*(const Vec3 &v) const { return m_ * v; }
  RotationMatrix transpose() const {
    return RotationMatrix(m_.transpose(), Unchecked{});
  }

  bool operator==(const RotationMatrix &o) const { return m_ == o.m_; }

private:
  struct Unchecked {};
  RotationMatrix(const Mat3 &m, Unchecked) : m_(m) {}

  Mat3 m_;
};

/// Two raw 3-vectors as emitted by a 6D rotation head.
struct Rotation6D {
  Vec3 a1 = Vec3::UnitX();
  Vec3 a2 = Vec3::UnitY();

  std::array<double, 6> as_array() const {
    return {a1.x(), a1.y(), a1.z(), a2.x(), a2.y(), a2.z()};
  }
  static Rotation6D from_array(const std::array<double, 6> &v) {
    return {Vec3(v[0], v[1], v[2]), Vec3(v[3], v[4], v[5])};
  }
};

struct Pose9D {
  RotationMatrix rotation;
  Vec3 translation = Vec3::Zero();
  Vec3 scale = Vec3::Ones();

  bool has_positive_scale() const { return (scale.array() > 0.0).all(); }
  bool operator==(const Pose9D &o) const {
    return rotation == o.rotation && translation == o.translation &&
           scale == o.scale;
  }
};

struct CameraIntrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  double width = 1.0;
  double height = 1.0;

  bool valid() const {
    return std::isfinite(fx) && std::isfinite(fy) && std::isfinite(cx) &&
           std::isfinite(cy) && fx > 0.0 && fy > 0.0 && width > 0.0 &&
           height > 0.0;
  }
  void validate() const {
    if (!valid())
      throw Error(ErrorKind::InvariantError,
                  "intrinsics require fx, fy, width, height > 0");
  }
  Mat3 matrix() const {
    Mat3 k;
    k << fx, 0.0, cx, 0.0, fy, cy, 0.0, 0.0, 1.0;
    return k;
  }
  bool operator==(const CameraIntrinsics &) const = default;
};

/// Center-size box in normalized image coordinates.
struct BBox2D {
  double cx = 0.5;
  double cy = 0.5;
  double w = 1.0;
  double h = 1.0;

  double x1() const { return cx - 0.5 * w; }
  double y1() const { return cy - 0.5 * h; }
  double x2() const { return cx + 0.5 * w; }
  double y2() const { return cy + 0.5 * h; }
  double area() const { return w * h; }

  bool valid() const {
    return cx >= 0.0 && cx <= 1.0 && cy >= 0.0 && cy <= 1.0 && w > 0.0 &&
           w <= 1.0 && h > 0.0 && h <= 1.0;
  }
  std::array<double, 4> as_array() const { return {cx, cy, w, h}; }
  static BBox2D from_corners(double x1, double y1, double x2, double y2) {
    return {0.5 * (x1 + x2), 0.5 * (y1 + y2), x2 - x1, y2 - y1};
  }
  bool operator==(const BBox2D &) const = default;
};

struct NormalizedCenter {
  double x = 0.5;
  double y = 0.5;
  bool operator==(const NormalizedCenter &) const = default;
};

/// Rotational symmetry of an object category, expressed in the object frame.
struct SymmetrySpec {
  enum class Kind { None, Continuous, Discrete };

  Kind kind = Kind::None;
  Vec3 axis = Vec3::UnitY();
  /// Discrete symmetry group elements. Identity is implied.
  std::vector<Mat3> elements;

  static SymmetrySpec none() { return {}; }
  static SymmetrySpec continuous(const Vec3 &axis) {
    SymmetrySpec s;
    s.kind = Kind::Continuous;
    s.axis = axis.normalized();
    return s;
  }
  static SymmetrySpec discrete(std::vector<Mat3> elements) {
    SymmetrySpec s;
    s.kind = Kind::Discrete;
    s.elements = std::move(elements);
    return s;
  }
  /// n-fold symmetry about `axis`: rotations by 2*pi*k/n, k = 1..n-1.
  static SymmetrySpec n_fold(const Vec3 &axis, int folds) {
    std::vector<Mat3> els;
    for (int k = 1; k < folds; ++k)
      els.push_back(
          RotationMatrix::about_axis(axis, 2.0 * kPi * k / folds).matrix());
    SymmetrySpec s = discrete(std::move(els));
    s.axis = axis.normalized();
    return s;
  }

  bool is_none() const { return kind == Kind::None; }
  bool operator==(const SymmetrySpec &o) const {
    return kind == o.kind && axis == o.axis && elements == o.elements;
  }
};

// ---------------------------------------------------------------------------
// Rotations

/// Gram-Schmidt orthonormalization of the 6D representation.
inline RotationMatrix rot6d_to_matrix(const Rotation6D &r) {
  constexpr double kEps = 1e-12;
  const double n1 = r.a1.norm();
  if (!(n1 > kEps))
    throw Error(ErrorKind::DegenerateInput, "6D rotation: a1 has zero norm");
  const Vec3 b1 = r.a1 / n1;
  Vec3 v = r.a2 - b1.dot(r.a2) * b1;
  // Second projection pass; mathematically a no-op, it removes the rounding
  // residue left when a2 is nearly parallel to a1.
  v -= b1.dot(v) * b1;
  const double n2 = v.norm();
  if (!(n2 > kEps))
    throw Error(ErrorKind::DegenerateInput,
                "6D rotation: a2 is parallel to a1");
  const Vec3 b2 = v / n2;
  Mat3 m;
  m.col(0) = b1;
  m.col(1) = b2;
  m.col(2) = b1.cross(b2);
  return RotationMatrix::from_matrix(m, 1e-9);
}

inline Rotation6D matrix_to_rot6d(const RotationMatrix &r) {
  return {r.column(0), r.column(1)};
}

inline double clamp_unit(double x) { return std::clamp(x, -1.0, 1.0); }

inline double geodesic_distance(const RotationMatrix &a,
                                const RotationMatrix &b) {
  const double tr = (a.matrix().transpose() * b.matrix()).trace();
  return std::acos(clamp_unit(0.5 * (tr - 1.0)));
}

inline double symmetry_aware_rot_distance(const RotationMatrix &a,
                                          const RotationMatrix &b,
                                          const SymmetrySpec &sym) {
  switch (sym.kind) {
  case SymmetrySpec::Kind::None:
    return geodesic_distance(a, b);
  case SymmetrySpec::Kind::Continuous: {
    const Vec3 ea = a * sym.axis;
    const Vec3 eb = b * sym.axis;
    return std::acos(clamp_unit(ea.dot(eb)));
  }
  case SymmetrySpec::Kind::Discrete: {
    double best = geodesic_distance(a, b);
    for (const Mat3 &s : sym.elements) {
      const double tr = (s.transpose() * a.matrix().transpose() * b.matrix())
                            .trace();
      best = std::min(best, std::acos(clamp_unit(0.5 * (tr - 1.0))));
    }
    return best;
  }
  }
  return geodesic_distance(a, b);
}

// ---------------------------------------------------------------------------
// Camera

/// Box center plus regressed offset, clamped to the unit square.
inline NormalizedCenter recover_center(const BBox2D &box, const Vec2 &delta) {
  return {std::clamp(box.cx + delta.x(), 0.0, 1.0),
          std::clamp(box.cy + delta.y(), 0.0, 1.0)};
}

inline Vec3 backproject(const NormalizedCenter &u, double depth,
                        const CameraIntrinsics &cam) {
  if (!(depth > 0.0))
    throw Error(ErrorKind::NonPositiveDepth, "back-projection needs z > 0");
  const double px = u.x * cam.width;
  const double py = u.y * cam.height;
  // K^-1 applied in closed form; t_z is exactly the depth.
  return {depth * (px - cam.cx) / cam.fx, depth * (py - cam.cy) / cam.fy,
          depth};
}

struct Projection {
  NormalizedCenter center;
  double depth = 0.0;
};

inline Projection project_point(const Vec3 &t, const CameraIntrinsics &cam) {
  if (!(t.z() > 0.0))
    throw Error(ErrorKind::NonPositiveDepth, "projection needs z > 0");
  const double px = cam.fx * t.x() / t.z() + cam.cx;
  const double py = cam.fy * t.y() / t.z() + cam.cy;
  return {{px / cam.width, py / cam.height}, t.z()};
}

// ---------------------------------------------------------------------------
// Cuboids

using Corners = std::array<Vec3, 8>;

/// Corner k has sign bits (x: bit 2, y: bit 1, z: bit 0); bit set means +.
inline Corners cuboid_corners(const Pose9D &pose) {
  Corners out;
  const Vec3 half = 0.5 * pose.scale;
  for (int k = 0; k < 8; ++k) {
    const Vec3 local((k & 4) ? half.x() : -half.x(),
                     (k & 2) ? half.y() : -half.y(),
                     (k & 1) ? half.z() : -half.z());
    out[k] = pose.rotation * local + pose.translation;
  }
  return out;
}

inline BBox2D project_cuboid_to_bbox(const Pose9D &pose,
                                     const CameraIntrinsics &cam) {
  double x1 = std::numeric_limits<double>::infinity();
  double y1 = x1;
  double x2 = -x1;
  double y2 = -x1;
  for (const Vec3 &c : cuboid_corners(pose)) {
    if (!(c.z() > 0.0))
      throw Error(ErrorKind::BehindCamera, "cuboid corner behind camera");
    const Projection p = project_point(c, cam);
    x1 = std::min(x1, p.center.x);
    y1 = std::min(y1, p.center.y);
    x2 = std::max(x2, p.center.x);
    y2 = std::max(y2, p.center.y);
  }
  x1 = std::clamp(x1, 0.0, 1.0);
  y1 = std::clamp(y1, 0.0, 1.0);
  x2 = std::clamp(x2, 0.0, 1.0);
  y2 = std::clamp(y2, 0.0, 1.0);
  return BBox2D::from_corners(x1, y1, x2, y2);
}

} // namespace posekit
