// SPDX-License-Identifier: Apache-2.0
/**
 * @file   scene.hpp
 * @brief  Scene records: the unit of evaluation.
 */
#pragma once

#include <nlohmann/json.hpp>

#include <optional>
#include <string>
#include <vector>

#include "posekit/geometry.hpp"

namespace posekit {

struct GtInstance {
  std::string category;
  Pose9D pose;
  std::optional<BBox2D> box;
  /// Fields not known to this schema version, kept for round-tripping.
  nlohmann::json extra = nlohmann::json::object();

  bool operator==(const GtInstance &) const = default;
};

struct PredInstance {
  std::string category;
  double confidence = 1.0;
  Pose9D pose;
  std::optional<BBox2D> box;
  /// Optional per-category probabilities, in config category order.
  std::optional<std::vector<double>> scores;
  nlohmann::json extra = nlohmann::json::object();

  bool operator==(const PredInstance &) const = default;
};

struct SceneRecord {
  std::string scene_id;
  CameraIntrinsics intrinsics;
  std::vector<GtInstance> gts;
  std::vector<PredInstance> preds;
  nlohmann::json extra = nlohmann::json::object();

  bool operator==(const SceneRecord &) const = default;
};

} // namespace posekit
