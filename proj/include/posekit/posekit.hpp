// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "posekit/box2d.hpp"
#include "posekit/config.hpp"
#include "posekit/error.hpp"
#include "posekit/geometry.hpp"
#include "posekit/heads.hpp"
#include "posekit/iou3d.hpp"
#include "posekit/losses.hpp"
#include "posekit/matching.hpp"
#include "posekit/metrics.hpp"
#include "posekit/scene.hpp"
#include "posekit/scene_io.hpp"
