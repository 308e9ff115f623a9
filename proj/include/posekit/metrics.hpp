// SPDX-License-Identifier: Apache-2.0
/**
 * @file   metrics.hpp
 * @brief  Category-level pose evaluation: mAP at 3D IoU thresholds and at
 *         combined rotation / translation error bounds.
 *
 * Per category, predictions from all scenes are ranked by confidence (ties
 * by scene index, then prediction index). Each prediction greedily takes the
 * unmatched same-scene, same-category ground truth with the highest 3D IoU.
 * For IoU thresholds the pair is a true positive when the IoU reaches the
 * threshold. For pose thresholds only pairs with IoU >= pose_iou_gate are
 * candidates, and the pair is a true positive when both errors are within
 * bounds. AP is the area under the monotone precision envelope.
 */
#pragma once

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iomanip>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "posekit/error.hpp"
#include "posekit/geometry.hpp"
#include "posekit/iou3d.hpp"
#include "posekit/parallel.hpp"
#include "posekit/scene.hpp"

namespace posekit {

inline constexpr double kUnbounded = std::numeric_limits<double>::infinity();

/// Rotation bound in degrees, translation bound in centimeters. Either may
/// be kUnbounded.
struct PoseThreshold {
  double degrees = 10.0;
  double centimeters = 10.0;

  std::string label() const {
    auto num = [](double v) {
      std::ostringstream os;
      os << v;
      return os.str();
    };
    std::string out;
    if (std::isfinite(degrees))
      out += num(degrees) + "deg";
    if (std::isfinite(centimeters))
      out += num(centimeters) + "cm";
    return out.empty() ? "any" : out;
  }
  bool operator==(const PoseThreshold &) const = default;
};

struct EvalConfig {
  std::vector<std::string> categories;
  std::vector<double> iou_thresholds{0.25, 0.5, 0.75};
  std::vector<PoseThreshold> pose_thresholds{{kUnbounded, 10.0},
                                             {10.0, kUnbounded},
                                             {10.0, 10.0},
                                             {5.0, 5.0},
                                             {10.0, 5.0}};
  /// Per-category symmetry; categories not listed are asymmetric.
  std::map<std::string, SymmetrySpec> symmetry;
  double pose_iou_gate = 0.1;
  /// Maximize IoU over the symmetry group for symmetric categories.
  bool symmetric_iou = true;
  SymmetricIouOptions symmetric_iou_options;
  std::string ap_method = "all-point";

  const SymmetrySpec &symmetry_of(const std::string &category) const {
    static const SymmetrySpec none;
    auto it = symmetry.find(category);
    return it == symmetry.end() ? none : it->second;
  }

  int category_index(const std::string &name) const {
    auto it = std::find(categories.begin(), categories.end(), name);
    return it == categories.end() ? -1
                                  : static_cast<int>(it - categories.begin());
  }

  void validate() const {
    if (categories.empty())
      throw Error(ErrorKind::InvariantError, "no categories configured");
    for (double t : iou_thresholds)
      if (!(t > 0.0 && t <= 1.0))
        throw Error(ErrorKind::InvariantError,
                    "IoU thresholds must lie in (0, 1]");
    for (const PoseThreshold &p : pose_thresholds)
      if (!(p.degrees > 0.0) || !(p.centimeters > 0.0))
        throw Error(ErrorKind::InvariantError,
                    "pose thresholds must be positive");
    if (!(pose_iou_gate >= 0.0 && pose_iou_gate <= 1.0))
      throw Error(ErrorKind::InvariantError, "pose IoU gate must be in [0, 1]");
    if (symmetric_iou_options.steps < 1)
      throw Error(ErrorKind::InvariantError, "symmetry steps must be >= 1");
    if (ap_method != "all-point")
      throw Error(ErrorKind::InvariantError,
                  "unsupported AP method '" + ap_method + "'");
  }
};

struct PoseError {
  double rotation_deg = 0.0;
  double translation_m = 0.0;
};

inline PoseError pose_errors(const Pose9D &pred, const Pose9D &gt,
                             const SymmetrySpec &sym) {
  return {rad_to_deg(symmetry_aware_rot_distance(pred.rotation, gt.rotation,
                                                 sym)),
          (pred.translation - gt.translation).norm()};
}

struct CategoryResult {
  std::string name;
  std::size_t gt_count = 0;
  std::size_t pred_count = 0;
  std::vector<double> iou_ap;  // one per IoU threshold
  std::vector<double> pose_ap; // one per pose threshold

  bool operator==(const CategoryResult &) const = default;
};

struct EvalResult {
  std::vector<double> iou_thresholds;
  std::vector<PoseThreshold> pose_thresholds;
  std::string ap_method = "all-point";
  std::size_t scene_count = 0;
  std::vector<CategoryResult> categories;
  /// Unweighted mean over categories with at least one ground truth.
  std::vector<double> mean_iou_ap;
  std::vector<double> mean_pose_ap;
  std::size_t evaluated_categories = 0;

  std::size_t total_gt() const {
    std::size_t n = 0;
    for (const auto &c : categories)
      n += c.gt_count;
    return n;
  }
  std::size_t total_preds() const {
    std::size_t n = 0;
    for (const auto &c : categories)
      n += c.pred_count;
    return n;
  }
  bool operator==(const EvalResult &) const = default;
};

/// All-point AP from true-positive flags in rank order.
inline double average_precision(const std::vector<char> &tp,
                                std::size_t gt_count) {
  if (gt_count == 0 || tp.empty())
    return 0.0;
  std::vector<double> precision(tp.size());
  std::size_t hits = 0;
  for (std::size_t i = 0; i < tp.size(); ++i) {
    hits += tp[i] ? 1 : 0;
    precision[i] = static_cast<double>(hits) / static_cast<double>(i + 1);
  }
  for (std::size_t i = tp.size() - 1; i-- > 0;)
    precision[i] = std::max(precision[i], precision[i + 1]);
  // Recall advances by 1/gt_count at each true positive.
  double area = 0.0;
  for (std::size_t i = 0; i < tp.size(); ++i)
    if (tp[i])
      area += precision[i];
  return area / static_cast<double>(gt_count);
}

namespace detail {

/// Pairwise quantities of one scene and one category.
struct CategoryBlock {
  std::vector<int> preds; // indices into SceneRecord::preds
  std::vector<int> gts;   // indices into SceneRecord::gts
  std::vector<double> iou;     // preds x gts, row-major
  std::vector<PoseError> err;  // preds x gts, row-major
};

struct RankedPred {
  double confidence;
  std::size_t scene;
  int block_row;
  int pred_index;
};

} // namespace detail

inline EvalResult evaluate_scene_set(const std::vector<SceneRecord> &scenes,
                                     const EvalConfig &cfg,
                                     unsigned threads = 1) {
  cfg.validate();
  const std::size_t ncat = cfg.categories.size();

  // blocks[scene][category]
  std::vector<std::vector<detail::CategoryBlock>> blocks(scenes.size());
  parallel_for(scenes.size(), threads, [&](std::size_t s) {
    const SceneRecord &sc = scenes[s];
    auto &bl = blocks[s];
    bl.resize(ncat);
    for (std::size_t g = 0; g < sc.gts.size(); ++g) {
      const int c = cfg.category_index(sc.gts[g].category);
      if (c < 0)
        throw Error(ErrorKind::InvariantError,
                    "scene '" + sc.scene_id + "': unknown category '" +
                        sc.gts[g].category + "'");
      bl[c].gts.push_back(static_cast<int>(g));
    }
    for (std::size_t p = 0; p < sc.preds.size(); ++p) {
      const int c = cfg.category_index(sc.preds[p].category);
      if (c < 0)
        throw Error(ErrorKind::InvariantError,
                    "scene '" + sc.scene_id + "': unknown category '" +
                        sc.preds[p].category + "'");
      bl[c].preds.push_back(static_cast<int>(p));
    }
    for (std::size_t c = 0; c < ncat; ++c) {
      auto &b = bl[c];
      const SymmetrySpec &sym = cfg.symmetry_of(cfg.categories[c]);
      b.iou.resize(b.preds.size() * b.gts.size());
      b.err.resize(b.iou.size());
      for (std::size_t i = 0; i < b.preds.size(); ++i)
        for (std::size_t j = 0; j < b.gts.size(); ++j) {
          const Pose9D &pp = sc.preds[b.preds[i]].pose;
          const Pose9D &gp = sc.gts[b.gts[j]].pose;
          const std::size_t k = i * b.gts.size() + j;
          b.iou[k] = cfg.symmetric_iou
                         ? iou_3d_symmetric(pp, gp, sym,
                                            cfg.symmetric_iou_options)
                         : iou_3d(pp, gp);
          b.err[k] = pose_errors(pp, gp, sym);
        }
    }
  });

  EvalResult r;
  r.iou_thresholds = cfg.iou_thresholds;
  r.pose_thresholds = cfg.pose_thresholds;
  r.ap_method = cfg.ap_method;
  r.scene_count = scenes.size();
  r.mean_iou_ap.assign(cfg.iou_thresholds.size(), 0.0);
  r.mean_pose_ap.assign(cfg.pose_thresholds.size(), 0.0);

  for (std::size_t c = 0; c < ncat; ++c) {
    CategoryResult cr;
    cr.name = cfg.categories[c];
    std::vector<detail::RankedPred> ranked;
    for (std::size_t s = 0; s < scenes.size(); ++s) {
      const auto &b = blocks[s][c];
      cr.gt_count += b.gts.size();
      for (std::size_t i = 0; i < b.preds.size(); ++i)
        ranked.push_back({scenes[s].preds[b.preds[i]].confidence, s,
                          static_cast<int>(i), b.preds[i]});
    }
    cr.pred_count = ranked.size();
    std::sort(ranked.begin(), ranked.end(),
              [](const detail::RankedPred &a, const detail::RankedPred &b) {
                if (a.confidence != b.confidence)
                  return a.confidence > b.confidence;
                if (a.scene != b.scene)
                  return a.scene < b.scene;
                return a.pred_index < b.pred_index;
              });

    // Greedy matching under an acceptance predicate on a (pred, gt) pair.
    auto run = [&](double gate, auto &&accept) {
      std::vector<std::vector<char>> taken(scenes.size());
      for (std::size_t s = 0; s < scenes.size(); ++s)
        taken[s].assign(blocks[s][c].gts.size(), 0);
      std::vector<char> tp(ranked.size(), 0);
      for (std::size_t k = 0; k < ranked.size(); ++k) {
        const auto &b = blocks[ranked[k].scene][c];
        auto &tk = taken[ranked[k].scene];
        const std::size_t row = ranked[k].block_row * b.gts.size();
        int best = -1;
        double best_iou = -1.0;
        for (std::size_t j = 0; j < b.gts.size(); ++j)
          if (!tk[j] && b.iou[row + j] > best_iou) {
            best_iou = b.iou[row + j];
            best = static_cast<int>(j);
          }
        if (best < 0 || best_iou < gate || best_iou <= 0.0)
          continue;
        if (accept(b.iou[row + best], b.err[row + best])) {
          tk[best] = 1;
          tp[k] = 1;
        }
      }
      return average_precision(tp, cr.gt_count);
    };

    for (double t : cfg.iou_thresholds)
      cr.iou_ap.push_back(
          run(t, [t](double iou, const PoseError &) { return iou >= t; }));
    for (const PoseThreshold &pt : cfg.pose_thresholds)
      cr.pose_ap.push_back(
          run(cfg.pose_iou_gate, [&pt](double, const PoseError &e) {
            return e.rotation_deg <= pt.degrees &&
                   100.0 * e.translation_m <= pt.centimeters;
          }));

    if (cr.gt_count > 0) {
      ++r.evaluated_categories;
      for (std::size_t k = 0; k < cr.iou_ap.size(); ++k)
        r.mean_iou_ap[k] += cr.iou_ap[k];
      for (std::size_t k = 0; k < cr.pose_ap.size(); ++k)
        r.mean_pose_ap[k] += cr.pose_ap[k];
    }
    r.categories.push_back(std::move(cr));
  }
  if (r.evaluated_categories > 0) {
    const double n = static_cast<double>(r.evaluated_categories);
    for (double &v : r.mean_iou_ap)
      v /= n;
    for (double &v : r.mean_pose_ap)
      v /= n;
  }
  return r;
}

// ---------------------------------------------------------------------------
// Reports

inline std::string iou_label(double t) {
  std::ostringstream os;
  os << "IoU" << std::llround(100.0 * t);
  return os.str();
}

inline nlohmann::json threshold_to_json(double v) {
  return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

inline double threshold_from_json(const nlohmann::json &j) {
  return j.is_null() ? kUnbounded : j.get<double>();
}

/// Machine-readable form of an EvalResult. Values are fractions in [0, 1].
inline nlohmann::json eval_result_to_json(const EvalResult &r) {
  using nlohmann::json;
  json j;
  j["ap_method"] = r.ap_method;
  j["scene_count"] = r.scene_count;
  j["evaluated_categories"] = r.evaluated_categories;
  j["iou_thresholds"] = r.iou_thresholds;
  json pts = json::array();
  for (const auto &p : r.pose_thresholds)
    pts.push_back({{"label", p.label()},
                   {"degrees", threshold_to_json(p.degrees)},
                   {"centimeters", threshold_to_json(p.centimeters)}});
  j["pose_thresholds"] = pts;
  json cats = json::array();
  for (const auto &c : r.categories)
    cats.push_back({{"name", c.name},
                    {"gt_count", c.gt_count},
                    {"pred_count", c.pred_count},
                    {"iou_ap", c.iou_ap},
                    {"pose_ap", c.pose_ap}});
  j["categories"] = cats;
  j["mean"] = {{"iou_ap", r.mean_iou_ap}, {"pose_ap", r.mean_pose_ap}};
  return j;
}

inline EvalResult eval_result_from_json(const nlohmann::json &j) {
  EvalResult r;
  try {
    r.ap_method = j.at("ap_method").get<std::string>();
    r.scene_count = j.at("scene_count").get<std::size_t>();
    r.evaluated_categories = j.at("evaluated_categories").get<std::size_t>();
    r.iou_thresholds = j.at("iou_thresholds").get<std::vector<double>>();
    for (const auto &p : j.at("pose_thresholds"))
      r.pose_thresholds.push_back({threshold_from_json(p.at("degrees")),
                                   threshold_from_json(p.at("centimeters"))});
    for (const auto &c : j.at("categories")) {
      CategoryResult cr;
      cr.name = c.at("name").get<std::string>();
      cr.gt_count = c.at("gt_count").get<std::size_t>();
      cr.pred_count = c.at("pred_count").get<std::size_t>();
      cr.iou_ap = c.at("iou_ap").get<std::vector<double>>();
      cr.pose_ap = c.at("pose_ap").get<std::vector<double>>();
      r.categories.push_back(std::move(cr));
    }
    r.mean_iou_ap = j.at("mean").at("iou_ap").get<std::vector<double>>();
    r.mean_pose_ap = j.at("mean").at("pose_ap").get<std::vector<double>>();
  } catch (const nlohmann::json::exception &e) {
    throw Error(ErrorKind::SchemaError, e.what());
  }
  return r;
}

/// Fixed-width table, one row per category plus the mean, values in
/// percent with one decimal.
inline std::string format_table(const EvalResult &r) {
  std::ostringstream os;
  std::vector<std::string> cols;
  for (double t : r.iou_thresholds)
    cols.push_back(iou_label(t));
  for (const auto &p : r.pose_thresholds)
    cols.push_back(p.label());
  os << std::left << std::setw(12) << "category" << std::right << std::setw(7)
     << "GT" << std::setw(7) << "preds";
  for (const auto &c : cols)
    os << std::setw(11) << c;
  os << '\n';
  auto row = [&](const std::string &name, std::size_t gt, std::size_t np,
                 const std::vector<double> &iou, const std::vector<double> &pose) {
    os << std::left << std::setw(12) << name << std::right << std::setw(7) << gt
       << std::setw(7) << np << std::fixed << std::setprecision(1);
    for (double v : iou)
      os << std::setw(11) << 100.0 * v;
    for (double v : pose)
      os << std::setw(11) << 100.0 * v;
    os << '\n';
  };
  for (const auto &c : r.categories)
    row(c.name, c.gt_count, c.pred_count, c.iou_ap, c.pose_ap);
  row("mean", r.total_gt(), r.total_preds(), r.mean_iou_ap, r.mean_pose_ap);
  if (r.evaluated_categories == 0)
    os << "note: no ground-truth instances (GT count 0); all metrics are 0\n";
  return os.str();
}

struct Report {
  std::string table;
  nlohmann::json record;
};

inline Report format_report(const EvalResult &r) {
  return {format_table(r), eval_result_to_json(r)};
}

} // namespace posekit
