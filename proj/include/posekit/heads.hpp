// SPDX-License-Identifier: Apache-2.0
/**
 * @file   heads.hpp
 * @brief  Forward math of the pose head: MLPs, box conditioning, class-wise
 *         slicing and assembly of a 9D pose from raw query outputs.
 */
#pragma once

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include <string>
#include <vector>

#include "posekit/error.hpp"
#include "posekit/geometry.hpp"

namespace posekit {

/// Refined decoder embedding of one object query.
struct QueryEmbedding {
  Eigen::VectorXd p;
  Eigen::Index dim() const { return p.size(); }
};

/// Affine layers with ReLU between them and identity at the output.
struct MlpWeights {
  struct Layer {
    Eigen::MatrixXd weight; // out x in
    Eigen::VectorXd bias;   // out
  };
  std::vector<Layer> layers;

  Eigen::Index input_dim() const {
    return layers.empty() ? 0 : layers.front().weight.cols();
  }
  Eigen::Index output_dim() const {
    return layers.empty() ? 0 : layers.back().weight.rows();
  }

  void validate() const {
    if (layers.empty())
      throw Error(ErrorKind::DimensionMismatch, "MLP has no layers");
    for (std::size_t k = 0; k < layers.size(); ++k) {
      const Layer &l = layers[k];
      if (l.bias.size() != l.weight.rows())
        throw Error(ErrorKind::DimensionMismatch,
                    "layer " + std::to_string(k) + ": bias size != rows");
      if (k > 0 && l.weight.cols() != layers[k - 1].weight.rows())
        throw Error(ErrorKind::DimensionMismatch,
                    "layer " + std::to_string(k) +
                        ": input size does not chain with previous layer");
    }
  }
};

inline Eigen::VectorXd mlp_forward(const Eigen::VectorXd &input,
                                   const MlpWeights &w) {
  w.validate();
  if (input.size() != w.input_dim())
    throw Error(ErrorKind::DimensionMismatch,
                "MLP input has " + std::to_string(input.size()) +
                    " entries, first layer expects " +
                    std::to_string(w.input_dim()));
  Eigen::VectorXd x = input;
  for (std::size_t k = 0; k < w.layers.size(); ++k) {
    x = w.layers[k].weight * x + w.layers[k].bias;
    if (k + 1 < w.layers.size())
      x = x.cwiseMax(0.0);
  }
  return x;
}

/// MLP over [p; cx, cy, w, h].
inline Eigen::VectorXd conditioned_forward(const QueryEmbedding &q,
                                           const BBox2D &box,
                                           const MlpWeights &w) {
  Eigen::VectorXd in(q.dim() + 4);
  in << q.p, box.cx, box.cy, box.w, box.h;
  return mlp_forward(in, w);
}

/// Per-query raw outputs. Rotation and scale heads are class-wise: one row
/// per category.
struct RawHeadOutput {
  Eigen::VectorXd class_logits;
  BBox2D box;
  Vec2 center_offset = Vec2::Zero();
  double depth = 1.0;
  Eigen::Matrix<double, Eigen::Dynamic, 6> rot6d_per_class;
  Eigen::Matrix<double, Eigen::Dynamic, 3> scale_per_class;

  Eigen::Index num_classes() const { return class_logits.size(); }

  void validate() const {
    const Eigen::Index c = num_classes();
    if (c < 1)
      throw Error(ErrorKind::DimensionMismatch, "no class logits");
    if (rot6d_per_class.rows() != c || scale_per_class.rows() != c)
      throw Error(ErrorKind::DimensionMismatch,
                  "class-wise heads must have one row per category");
  }

  Rotation6D rot6d(Eigen::Index category) const {
    const auto r = rot6d_per_class.row(category);
    return {Vec3(r(0), r(1), r(2)), Vec3(r(3), r(4), r(5))};
  }
  Vec3 scale(Eigen::Index category) const {
    return scale_per_class.row(category).transpose();
  }
};

struct ClasswiseSelection {
  int category = 0;
  Rotation6D rotation;
  Vec3 scale = Vec3::Ones();
};

/// Rows of the highest-scoring class (ties go to the lowest index).
inline ClasswiseSelection select_classwise(const RawHeadOutput &raw) {
  raw.validate();
  Eigen::Index best = 0;
  for (Eigen::Index k = 1; k < raw.num_classes(); ++k)
    if (raw.class_logits(k) > raw.class_logits(best))
      best = k;
  return {static_cast<int>(best), raw.rot6d(best), raw.scale(best)};
}

inline constexpr double kMinScale = 1e-4;

struct AssembledPose {
  int category = 0;
  Pose9D pose;
  NormalizedCenter center;
  /// Set when a non-positive scale component was raised to kMinScale.
  bool scale_clamped = false;
};

inline AssembledPose assemble_pose(const RawHeadOutput &raw,
                                   const CameraIntrinsics &cam) {
  const ClasswiseSelection sel = select_classwise(raw);
  AssembledPose out;
  out.category = sel.category;
  out.center = recover_center(raw.box, raw.center_offset);
  out.pose.translation = backproject(out.center, raw.depth, cam);
  out.pose.rotation = rot6d_to_matrix(sel.rotation);
  out.pose.scale = sel.scale;
  for (int k = 0; k < 3; ++k)
    if (!(out.pose.scale[k] >= kMinScale)) {
      out.pose.scale[k] = kMinScale;
      out.scale_clamped = true;
    }
  return out;
}

// ---------------------------------------------------------------------------
// Text weight files: {"layers": [{"weight": [[...], ...], "bias": [...]}]}

inline MlpWeights mlp_weights_from_json(const nlohmann::json &j) {
  if (!j.is_object() || !j.contains("layers") || !j["layers"].is_array())
    throw Error(ErrorKind::SchemaError, "expected object with 'layers' array",
                0, "layers");
  MlpWeights w;
  std::size_t k = 0;
  for (const auto &lj : j["layers"]) {
    const std::string path = "layers[" + std::to_string(k++) + "]";
    if (!lj.contains("weight") || !lj.contains("bias"))
      throw Error(ErrorKind::SchemaError, "layer needs 'weight' and 'bias'", 0,
                  path);
    const auto &rows = lj["weight"];
    const auto &bias = lj["bias"];
    if (!rows.is_array() || rows.empty() || !rows[0].is_array() ||
        !bias.is_array())
      throw Error(ErrorKind::SchemaError, "weight must be a nested array", 0,
                  path + ".weight");
    MlpWeights::Layer layer;
    layer.weight.resize(static_cast<Eigen::Index>(rows.size()),
                        static_cast<Eigen::Index>(rows[0].size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (!rows[r].is_array() || rows[r].size() != rows[0].size())
        throw Error(ErrorKind::SchemaError, "ragged weight matrix", 0,
                    path + ".weight");
      for (std::size_t c = 0; c < rows[r].size(); ++c)
        layer.weight(r, c) = rows[r][c].get<double>();
    }
    layer.bias.resize(static_cast<Eigen::Index>(bias.size()));
    for (std::size_t r = 0; r < bias.size(); ++r)
      layer.bias(r) = bias[r].get<double>();
    w.layers.push_back(std::move(layer));
  }
  w.validate();
  return w;
}

inline nlohmann::json mlp_weights_to_json(const MlpWeights &w) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto &l : w.layers) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
      nlohmann::json row = nlohmann::json::array();
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c)
        row.push_back(l.weight(r, c));
      rows.push_back(std::move(row));
    }
    nlohmann::json bias = nlohmann::json::array();
    for (Eigen::Index r = 0; r < l.bias.size(); ++r)
      bias.push_back(l.bias(r));
    layers.push_back({{"weight", rows}, {"bias", bias}});
  }
  return {{"layers", layers}};
}

} // namespace posekit
