// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "posekit/heads.hpp"

using namespace posekit;

namespace {

MlpWeights random_mlp(std::mt19937_64 &rng, std::vector<int> dims) {
  std::normal_distribution<double> n(0.0, 0.5);
  MlpWeights w;
  for (std::size_t k = 1; k < dims.size(); ++k) {
    MlpWeights::Layer l;
    l.weight.resize(dims[k], dims[k - 1]);
    l.bias.resize(dims[k]);
    for (int r = 0; r < dims[k]; ++r) {
      l.bias(r) = n(rng);
      for (int c = 0; c < dims[k - 1]; ++c)
        l.weight(r, c) = n(rng);
    }
    w.layers.push_back(l);
  }
  return w;
}

RawHeadOutput raw(int classes) {
  RawHeadOutput r;
  r.class_logits = Eigen::VectorXd::Zero(classes);
  r.box = {0.5, 0.5, 0.2, 0.2};
  r.rot6d_per_class = Eigen::MatrixXd::Zero(classes, 6);
  r.scale_per_class = Eigen::MatrixXd::Ones(classes, 3);
  for (int k = 0; k < classes; ++k) {
    r.rot6d_per_class(k, 0) = 1.0;
    r.rot6d_per_class(k, 4) = 1.0;
  }
  return r;
}

} // namespace

TEST(Mlp, HandComputedTwoLayer) {
  MlpWeights w;
  MlpWeights::Layer l1{Eigen::MatrixXd(2, 2), Eigen::VectorXd(2)};
  l1.weight << 1, -1, 2, 0;
  l1.bias << 0, -5;
  MlpWeights::Layer l2{Eigen::MatrixXd(1, 2), Eigen::VectorXd(1)};
  l2.weight << 3, 7;
  l2.bias << -1;
  w.layers = {l1, l2};
  // hidden = relu([1-2, 2-5]) = [0, 0]; relu applies between layers only.
  EXPECT_EQ(mlp_forward(Eigen::Vector2d(1, 2), w)(0), -1.0);
  // hidden = relu([3-0, 6-5]) = [3, 1]
  EXPECT_EQ(mlp_forward(Eigen::Vector2d(3, 0), w)(0), 3 * 3 + 7 * 1 - 1);
}

TEST(Mlp, ConditionedForwardConcatenatesBox) {
  std::mt19937_64 rng(1);
  const auto w = random_mlp(rng, {7, 5, 4});
  QueryEmbedding q{Eigen::Vector3d(0.1, -0.2, 0.3)};
  const BBox2D b{0.4, 0.5, 0.1, 0.2};
  Eigen::VectorXd in(7);
  in << 0.1, -0.2, 0.3, 0.4, 0.5, 0.1, 0.2;
  EXPECT_EQ(conditioned_forward(q, b, w), mlp_forward(in, w));
  // Changing only the box changes the output.
  EXPECT_NE(conditioned_forward(q, {0.6, 0.5, 0.1, 0.2}, w), mlp_forward(in, w));
}

TEST(Mlp, DimensionErrors) {
  std::mt19937_64 rng(2);
  auto w = random_mlp(rng, {3, 4, 2});
  EXPECT_THROW(mlp_forward(Eigen::VectorXd::Zero(2), w), Error);
  w.layers[1].weight.resize(2, 5);
  EXPECT_THROW(w.validate(), Error);
  EXPECT_THROW(MlpWeights{}.validate(), Error);
}

TEST(Mlp, JsonRoundTrip) {
  std::mt19937_64 rng(3);
  const auto w = random_mlp(rng, {6, 8, 3});
  const auto back = mlp_weights_from_json(
      nlohmann::json::parse(mlp_weights_to_json(w).dump()));
  ASSERT_EQ(back.layers.size(), 2u);
  for (std::size_t k = 0; k < 2; ++k) {
    EXPECT_EQ(back.layers[k].weight, w.layers[k].weight);
    EXPECT_EQ(back.layers[k].bias, w.layers[k].bias);
  }
  EXPECT_THROW(mlp_weights_from_json(nlohmann::json::parse(R"({"layers":[{"weight":[[1,2],[3]],"bias":[0,0]}]})")),
               Error);
  EXPECT_THROW(mlp_weights_from_json(nlohmann::json::parse(R"({"w":[]})")), Error);
}

TEST(Classwise, SelectsArgmaxRows) {
  auto r = raw(3);
  r.class_logits << 0.1, 2.0, -1.0;
  r.scale_per_class.row(1) << 0.2, 0.3, 0.4;
  r.rot6d_per_class.row(1) << 0, 1, 0, -1, 0, 0;
  const auto s = select_classwise(r);
  EXPECT_EQ(s.category, 1);
  EXPECT_EQ(s.scale, Vec3(0.2, 0.3, 0.4));
  EXPECT_EQ(s.rotation.a1, Vec3(0, 1, 0));
  r.class_logits << 1.0, 1.0, 1.0;
  EXPECT_EQ(select_classwise(r).category, 0);
}

TEST(Classwise, ShapeErrors) {
  auto r = raw(3);
  r.scale_per_class.resize(2, 3);
  EXPECT_THROW(select_classwise(r), Error);
  EXPECT_THROW(select_classwise(raw(0)), Error);
}

TEST(Assemble, BuildsPoseFromHeads) {
  const CameraIntrinsics cam{500, 500, 320, 240, 640, 480};
  auto r = raw(2);
  r.class_logits << -1, 1;
  r.box = {0.6, 0.4, 0.2, 0.2};
  r.center_offset = Vec2(0.05, -0.05);
  r.depth = 2.0;
  r.scale_per_class.row(1) << 0.3, -0.1, 0.5;
  const auto a = assemble_pose(r, cam);
  EXPECT_EQ(a.category, 1);
  EXPECT_NEAR(a.center.x, 0.65, 1e-15);
  EXPECT_NEAR(a.center.y, 0.35, 1e-15);
  EXPECT_NEAR(a.pose.translation.x(), (0.65 * 640 - 320) / 500 * 2.0, 1e-12);
  EXPECT_NEAR(a.pose.translation.y(), (0.35 * 480 - 240) / 500 * 2.0, 1e-12);
  EXPECT_EQ(a.pose.translation.z(), 2.0);
  EXPECT_TRUE(a.scale_clamped);
  EXPECT_EQ(a.pose.scale, Vec3(0.3, kMinScale, 0.5));
  EXPECT_TRUE(a.pose.rotation.matrix().isApprox(Mat3::Identity()));

  r.depth = -1.0;
  try {
    assemble_pose(r, cam);
    FAIL();
  } catch (const Error &e) {
    EXPECT_EQ(e.kind(), ErrorKind::NonPositiveDepth);
  }
}

TEST(Assemble, ProjectionRecoversCenter) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.1, 0.9), o(-0.1, 0.1), z(0.3, 8.0);
  const CameraIntrinsics cam{577.5, 577.5, 319.5, 239.5, 640, 480};
  for (int i = 0; i < 1000; ++i) {
    auto r = raw(1);
    r.box = {u(rng), u(rng), 0.1, 0.1};
    r.center_offset = Vec2(o(rng), o(rng));
    r.depth = z(rng);
    const auto a = assemble_pose(r, cam);
    const auto p = project_point(a.pose.translation, cam);
    EXPECT_NEAR(p.center.x, a.center.x, 1e-9);
    EXPECT_NEAR(p.center.y, a.center.y, 1e-9);
    EXPECT_NEAR(p.depth, r.depth, 1e-9);
  }
}
