// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "posekit/geometry.hpp"

using namespace posekit;

namespace {

constexpr double kTol = 1e-9;

Mat3 rz(double a) { return oracle::axis_angle(Vec3::UnitZ(), a); }

CameraIntrinsics cam640() { return {500.0, 500.0, 320.0, 320.0, 640.0, 640.0}; }

} // namespace

TEST(Rot6d, IdentityColumns) {
  const auto r = rot6d_to_matrix({Vec3(1, 0, 0), Vec3(0, 1, 0)});
  EXPECT_TRUE(r.matrix().isApprox(Mat3::Identity(), kTol));
}

TEST(Rot6d, ScaleAndShearAlongFirstColumnRemoved) {
  const auto r = rot6d_to_matrix({Vec3(2, 0, 0), Vec3(1, 1, 0)});
  EXPECT_LT((r.matrix() - Mat3::Identity()).cwiseAbs().maxCoeff(), kTol);
}

TEST(Rot6d, DegenerateInputsThrow) {
  EXPECT_THROW(rot6d_to_matrix({Vec3::Zero(), Vec3::UnitY()}), Error);
  EXPECT_THROW(rot6d_to_matrix({Vec3::UnitX(), Vec3(3, 0, 0)}), Error);
  try {
    rot6d_to_matrix({Vec3::UnitX(), Vec3(-2, 0, 0)});
  } catch (const Error &e) {
    EXPECT_EQ(e.kind(), ErrorKind::DegenerateInput);
  }
}

TEST(Rot6d, MatrixToRot6dTakesFirstTwoColumns) {
  const auto id = matrix_to_rot6d(RotationMatrix::identity());
  EXPECT_EQ(id.a1, Vec3(1, 0, 0));
  EXPECT_EQ(id.a2, Vec3(0, 1, 0));
  const auto r = matrix_to_rot6d(RotationMatrix::from_matrix(rz(kPi / 2)));
  EXPECT_LT((r.a1 - Vec3(0, 1, 0)).norm(), kTol);
  EXPECT_LT((r.a2 - Vec3(-1, 0, 0)).norm(), kTol);
}

TEST(Rot6d, RoundTripOverRandomRotations) {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 1000; ++i) {
    const auto r = RotationMatrix::from_matrix(oracle::random_rotation(rng));
    const auto back = rot6d_to_matrix(matrix_to_rot6d(r));
    EXPECT_LT((back.matrix() - r.matrix()).cwiseAbs().maxCoeff(), kTol);
  }
}

TEST(Rot6d, FuzzAlwaysProperRotation) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> n(0.0, 3.0);
  for (int i = 0; i < 100000; ++i) {
    const Rotation6D r{Vec3(n(rng), n(rng), n(rng)), Vec3(n(rng), n(rng), n(rng))};
    const Mat3 m = rot6d_to_matrix(r).matrix();
    ASSERT_LT((m.transpose() * m - Mat3::Identity()).cwiseAbs().maxCoeff(), kTol);
    ASSERT_NEAR(m.determinant(), 1.0, kTol);
  }
}

TEST(Rot6d, GramSchmidtInvariance) {
  std::mt19937_64 rng(13);
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> k(0.1, 10.0), c(-5.0, 5.0);
  for (int i = 0; i < 1000; ++i) {
    const Vec3 a1(n(rng), n(rng), n(rng)), a2(n(rng), n(rng), n(rng));
    const double kk = k(rng), cc = c(rng);
    const Mat3 base = rot6d_to_matrix({a1, a2}).matrix();
    const Mat3 moved = rot6d_to_matrix({kk * a1, a2 + cc * a1}).matrix();
    EXPECT_LT((base - moved).cwiseAbs().maxCoeff(), kTol);
  }
}

TEST(RotationMatrix, RejectsImproperMatrices) {
  Mat3 reflect = Mat3::Identity();
  reflect(2, 2) = -1.0;
  EXPECT_THROW(RotationMatrix::from_matrix(reflect), Error);
  EXPECT_THROW(RotationMatrix::from_matrix(2.0 * Mat3::Identity()), Error);
}

TEST(Geodesic, KnownAngles) {
  const auto id = RotationMatrix::identity();
  EXPECT_EQ(geodesic_distance(id, id), 0.0);
  for (const Vec3 &axis : {Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(1, 1, 1)})
    EXPECT_NEAR(geodesic_distance(
                    id, RotationMatrix::from_matrix(oracle::axis_angle(axis, kPi))),
                kPi, 1e-7);
  EXPECT_NEAR(geodesic_distance(id, RotationMatrix::from_matrix(rz(0.3))), 0.3,
              kTol);
}

TEST(Geodesic, MetricPropertiesOnRandomTriples) {
  std::mt19937_64 rng(17);
  for (int i = 0; i < 10000; ++i) {
    const auto a = RotationMatrix::from_matrix(oracle::random_rotation(rng));
    const auto b = RotationMatrix::from_matrix(oracle::random_rotation(rng));
    const auto c = RotationMatrix::from_matrix(oracle::random_rotation(rng));
    const double ab = geodesic_distance(a, b);
    EXPECT_EQ(ab, geodesic_distance(b, a));
    EXPECT_LE(geodesic_distance(a, c), ab + geodesic_distance(b, c) + kTol);
    EXPECT_GE(ab, 0.0);
    EXPECT_LE(ab, kPi);
  }
}

TEST(Geodesic, RightInvariance) {
  std::mt19937_64 rng(19);
  for (int i = 0; i < 1000; ++i) {
    const auto a = RotationMatrix::from_matrix(oracle::random_rotation(rng));
    const auto b = RotationMatrix::from_matrix(oracle::random_rotation(rng));
    const auto q = RotationMatrix::from_matrix(oracle::random_rotation(rng));
    EXPECT_NEAR(geodesic_distance(a * q, b * q), geodesic_distance(a, b), kTol);
  }
}

TEST(SymmetryDistance, ContinuousAxisInvariance) {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> ang(-kPi, kPi);
  const auto sym = SymmetrySpec::continuous(Vec3::UnitY());
  for (int i = 0; i < 100; ++i) {
    const auto r = RotationMatrix::from_matrix(oracle::random_rotation(rng));
    const auto spun = r * RotationMatrix::from_matrix(
                              oracle::axis_angle(Vec3::UnitY(), ang(rng)));
    EXPECT_LT(symmetry_aware_rot_distance(r, spun, sym), 1e-6);
  }
}

TEST(SymmetryDistance, NoneEqualsGeodesicAndBoundsHold) {
  std::mt19937_64 rng(29);
  const auto cont = SymmetrySpec::continuous(Vec3::UnitY());
  const auto disc = SymmetrySpec::n_fold(Vec3::UnitZ(), 4);
  for (int i = 0; i < 1000; ++i) {
    const auto a = RotationMatrix::from_matrix(oracle::random_rotation(rng));
    const auto b = RotationMatrix::from_matrix(oracle::random_rotation(rng));
    const double g = geodesic_distance(a, b);
    EXPECT_EQ(symmetry_aware_rot_distance(a, b, SymmetrySpec::none()), g);
    EXPECT_LE(symmetry_aware_rot_distance(a, b, cont), g + kTol);
    EXPECT_LE(symmetry_aware_rot_distance(a, b, disc), g + kTol);
  }
}

TEST(SymmetryDistance, DiscreteTwoFoldAboutZ) {
  std::mt19937_64 rng(31);
  const auto sym = SymmetrySpec::n_fold(Vec3::UnitZ(), 2);
  Mat3 flip = Mat3::Identity();
  flip(0, 0) = flip(1, 1) = -1.0;
  // Explicit minimum over the set {I, diag(-1,-1,1)}.
  for (int i = 0; i < 100; ++i) {
    const auto a = RotationMatrix::from_matrix(oracle::random_rotation(rng));
    const auto b = RotationMatrix::from_matrix(a.matrix() * flip);
    EXPECT_LT(symmetry_aware_rot_distance(a, b, sym), 1e-6);
    EXPECT_NEAR(geodesic_distance(a, b), kPi, 1e-6);
  }
}

TEST(Center, RecoverAddsAndClamps) {
  const BBox2D mid{0.5, 0.5, 0.2, 0.2};
  EXPECT_EQ(recover_center(mid, Vec2(0, 0)), (NormalizedCenter{0.5, 0.5}));
  const auto u = recover_center({0.3, 0.4, 0.1, 0.1}, Vec2(0.05, -0.1));
  EXPECT_NEAR(u.x, 0.35, 1e-15);
  EXPECT_NEAR(u.y, 0.30, 1e-15);
  EXPECT_EQ(recover_center({0.98, 0.5, 0.02, 0.1}, Vec2(0.1, 0)),
            (NormalizedCenter{1.0, 0.5}));
  EXPECT_EQ(recover_center({0.02, 0.01, 0.02, 0.02}, Vec2(-0.5, -0.5)),
            (NormalizedCenter{0.0, 0.0}));
}

TEST(Camera, BackprojectKnownValues) {
  const auto cam = cam640();
  const Vec3 axis = backproject({320.0 / 640.0, 320.0 / 640.0}, 2.0, cam);
  EXPECT_NEAR(axis.norm() - 2.0, 0.0, kTol);
  EXPECT_EQ(axis.z(), 2.0);
  const Vec3 t = backproject({0.75, 0.5}, 1.0, cam);
  EXPECT_NEAR(t.x(), 0.32, kTol);
  EXPECT_NEAR(t.y(), 0.0, kTol);
  EXPECT_EQ(t.z(), 1.0);
  EXPECT_THROW(backproject({0.5, 0.5}, 0.0, cam), Error);
  EXPECT_THROW(backproject({0.5, 0.5}, -1.0, cam), Error);
}

TEST(Camera, ProjectKnownValues) {
  const auto cam = cam640();
  const auto p = project_point(Vec3(0.32, 0.0, 1.0), cam);
  EXPECT_NEAR(p.center.x, 0.75, kTol);
  EXPECT_NEAR(p.center.y, 0.5, kTol);
  EXPECT_EQ(p.depth, 1.0);
  const auto c = project_point(Vec3(0, 0, 2), cam);
  EXPECT_NEAR(c.center.x, 0.5, kTol);
  EXPECT_NEAR(c.center.y, 0.5, kTol);
  EXPECT_THROW(project_point(Vec3(0, 0, 0), cam), Error);
}

TEST(Camera, ProjectBackprojectRoundTrip) {
  std::mt19937_64 rng(37);
  std::uniform_real_distribution<double> u(0.0, 1.0), z(0.1, 100.0);
  const CameraIntrinsics cam{577.5, 577.5, 319.5, 239.5, 640, 480};
  for (int i = 0; i < 10000; ++i) {
    const NormalizedCenter c{u(rng), u(rng)};
    const double d = z(rng);
    const auto p = project_point(backproject(c, d, cam), cam);
    EXPECT_NEAR(p.center.x, c.x, kTol);
    EXPECT_NEAR(p.center.y, c.y, kTol);
    EXPECT_NEAR(p.depth, d, kTol);
  }
}

TEST(Cuboid, CornersOfUnitAndTranslatedCubes) {
  Pose9D unit;
  for (const Vec3 &c : cuboid_corners(unit))
    EXPECT_EQ(c.cwiseAbs(), Vec3::Constant(0.5));
  Pose9D moved;
  moved.translation = Vec3(1, 2, 3);
  moved.scale = Vec3::Constant(2.0);
  for (const Vec3 &c : cuboid_corners(moved))
    EXPECT_EQ((c - moved.translation).cwiseAbs(), Vec3::Ones());
}

TEST(Cuboid, RotatedCornersPreserveDistancesAndCentroid) {
  std::mt19937_64 rng(41);
  Pose9D p;
  p.rotation = RotationMatrix::from_matrix(oracle::random_rotation(rng));
  p.translation = Vec3(0.3, -0.2, 2.0);
  p.scale = Vec3(0.2, 0.4, 0.6);
  const auto cs = cuboid_corners(p);
  Vec3 centroid = Vec3::Zero();
  for (const Vec3 &c : cs) {
    centroid += c;
    EXPECT_NEAR((c - p.translation).norm(), 0.5 * p.scale.norm(), kTol);
  }
  EXPECT_LT((centroid / 8.0 - p.translation).norm(), kTol);
}

TEST(Cuboid, ProjectedBoxBruteForce) {
  const CameraIntrinsics cam{400, 400, 320, 320, 640, 640};
  Pose9D p;
  p.translation = Vec3(0, 0, 4);
  const BBox2D b = project_cuboid_to_bbox(p, cam);
  // Extremes: near face (z = 3.5) dominates, half extent 400 * 0.5 / 3.5 px.
  const double half = 400.0 * 0.5 / 3.5 / 640.0;
  EXPECT_NEAR(b.cx, 0.5, kTol);
  EXPECT_NEAR(b.cy, 0.5, kTol);
  EXPECT_NEAR(b.w, 2 * half, kTol);
  EXPECT_NEAR(b.h, 2 * half, kTol);
}

TEST(Cuboid, ProjectedBoxClipsToImage) {
  const CameraIntrinsics cam{400, 400, 320, 320, 640, 640};
  Pose9D p;
  p.translation = Vec3(2.9, 0, 4); // straddles the right border
  const BBox2D b = project_cuboid_to_bbox(p, cam);
  EXPECT_NEAR(b.x2(), 1.0, kTol);
  EXPECT_GE(b.x1(), 0.0);
  const double x1 = (400.0 * 2.4 / 4.5 + 320.0) / 640.0; // far face, left edge
  EXPECT_NEAR(b.x1(), x1, kTol);
}

TEST(Cuboid, BehindCameraThrows) {
  const CameraIntrinsics cam{400, 400, 320, 320, 640, 640};
  Pose9D p;
  p.translation = Vec3(0, 0, 0.2);
  try {
    project_cuboid_to_bbox(p, cam);
    FAIL();
  } catch (const Error &e) {
    EXPECT_EQ(e.kind(), ErrorKind::BehindCamera);
  }
}
