// SPDX-License-Identifier: Apache-2.0
/**
 * @file   cli.hpp
 * @brief  Command implementations behind the posekit executable. Kept in the
 *         library so that tests can drive them in-process.
 *
 * Exit codes: 0 success, 2 schema error, 3 invariant error, 4 internal or
 * I/O error.
 */
#pragma once

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "posekit/config.hpp"
#include "posekit/error.hpp"
#include "posekit/heads.hpp"
#include "posekit/losses.hpp"
#include "posekit/matching.hpp"
#include "posekit/metrics.hpp"
#include "posekit/parallel.hpp"
#include "posekit/scene_io.hpp"

namespace posekit::cli {

enum ExitCode : int {
  kOk = 0,
  kUsage = 1,
  kSchema = 2,
  kInvariant = 3,
  kInternal = 4,
};

struct Options {
  std::string config;
  std::string scenes;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  bool overwrite_boxes = false;
  std::size_t count = 0;
  std::optional<std::string> profile;
};

inline int exit_code_for(const Error &e) {
  switch (e.kind()) {
  case ErrorKind::SchemaError:
    return kSchema;
  case ErrorKind::InvariantError:
  case ErrorKind::DegenerateInput:
  case ErrorKind::NonPositiveDepth:
  case ErrorKind::BehindCamera:
  case ErrorKind::DimensionMismatch:
    return kInvariant;
  case ErrorKind::IoError:
    return kUsage;
  default:
    return kInternal;
  }
}

/// Runs `body`, mapping exceptions to exit codes with a message on `err`.
template <typename Body> int guarded(std::ostream &err, Body &&body) {
  try {
    body();
    return kOk;
  } catch (const Error &e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e);
  } catch (const std::exception &e) {
    err << "internal error: " << e.what() << '\n';
    return kInternal;
  }
}

inline RunConfig effective_config(const Options &opt) {
  RunConfig c = opt.config.empty() ? default_config() : load_config(opt.config);
  if (opt.seed)
    c.seed = *opt.seed;
  if (opt.threads)
    c.threads = *opt.threads;
  if (opt.profile)
    c.synth.profile = *opt.profile;
  c.validate();
  return c;
}

inline std::vector<SceneRecord> read_scene_file(const std::string &path) {
  if (path.empty())
    throw Error(ErrorKind::IoError, "--scenes is required");
  std::ifstream in(path);
  if (!in)
    throw Error(ErrorKind::IoError, "cannot open scene file '" + path + "'");
  return parse_scenes(in);
}

inline void write_text(const std::string &path, const std::string &text,
                       std::ostream &fallback) {
  if (path.empty() || path == "-") {
    fallback << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw Error(ErrorKind::IoError, "cannot write '" + path + "'");
  out << text;
  if (!out)
    throw Error(ErrorKind::IoError, "write to '" + path + "' failed");
}

// ---------------------------------------------------------------------------
// Per-scene matching shared by `match` and `losses`

struct SceneMatch {
  std::string scene_id;
  std::optional<std::string> skipped;
  std::vector<MatchCandidate> preds;
  std::vector<LabeledInstance> gts;
  Assignment assignment;
  std::vector<CostBreakdown> pair_costs; // aligned with assignment.pairs
};

inline MatchCandidate to_candidate(const PredInstance &p, const RunConfig &c) {
  MatchCandidate m;
  const std::size_t n = c.categories().size();
  if (p.scores) {
    if (p.scores->size() != n)
      throw Error(ErrorKind::InvariantError,
                  "prediction scores must have one entry per category");
    m.class_probs = *p.scores;
  } else {
    m.class_probs.assign(n, 0.0);
    const int k = c.eval.category_index(p.category);
    if (k < 0)
      throw Error(ErrorKind::InvariantError,
                  "unknown category '" + p.category + "'");
    m.class_probs[k] = p.confidence;
  }
  m.box = *p.box;
  m.pose = p.pose;
  return m;
}

inline SceneMatch match_scene(const SceneRecord &sc, const RunConfig &c) {
  SceneMatch sm;
  sm.scene_id = sc.scene_id;
  if (sc.gts.empty() || sc.preds.empty()) {
    sm.skipped = "scene needs at least one prediction and one ground truth";
    return sm;
  }
  if (sc.preds.size() < sc.gts.size()) {
    sm.skipped = "fewer predictions than ground-truth instances";
    return sm;
  }
  for (const auto &p : sc.preds) {
    if (!p.box) {
      sm.skipped = "prediction without a derivable 2D box";
      return sm;
    }
    sm.preds.push_back(to_candidate(p, c));
  }
  for (const auto &g : sc.gts) {
    const int k = c.eval.category_index(g.category);
    if (k < 0)
      throw Error(ErrorKind::InvariantError,
                  "unknown category '" + g.category + "'");
    if (!g.box) {
      sm.skipped = "ground truth without a derivable 2D box";
      return sm;
    }
    sm.gts.push_back({k, *g.box, g.pose});
  }
  const auto lookup = [&c](int k) -> const SymmetrySpec & {
    return c.eval.symmetry_of(c.categories()[k]);
  };
  const CostMatrix cost =
      build_cost_matrix(sm.preds, sm.gts, c.cost_weights, lookup, c.focal);
  sm.assignment = solve_assignment(cost);
  for (const auto &[pi, gi] : sm.assignment.pairs)
    sm.pair_costs.push_back(pairwise_cost_breakdown(
        sm.preds[pi], sm.gts[gi], c.cost_weights, lookup(sm.gts[gi].category),
        c.focal));
  return sm;
}

inline std::vector<SceneRecord> with_boxes(std::vector<SceneRecord> scenes,
                                           bool overwrite, std::ostream &err) {
  BoxDerivation d = derive_boxes(std::move(scenes), overwrite);
  for (const auto &f : d.failures)
    err << "warning: scene '" << f.scene_id << "' "
        << (f.is_prediction ? "pred " : "gt ") << f.index << ": " << f.message
        << '\n';
  return std::move(d.scenes);
}

inline nlohmann::json breakdown_to_json(const CostBreakdown &b) {
  return {{"cls", b.cls},     {"bbox", b.bbox}, {"iou", b.iou},
          {"trans", b.trans}, {"rot", b.rot},   {"total", b.total}};
}

// ---------------------------------------------------------------------------
// Commands

inline int cmd_evaluate(const Options &opt, std::ostream &out,
                        std::ostream &err) {
  return guarded(err, [&] {
    const RunConfig c = effective_config(opt);
    const auto scenes = read_scene_file(opt.scenes);
    const EvalResult r = evaluate_scene_set(scenes, c.eval, c.threads);
    const Report rep = format_report(r);
    out << rep.table;
    nlohmann::json doc = {{"result", rep.record},
                          {"config", config_to_json(c, false)}};
    write_text(opt.out, doc.dump(2) + "\n", out);
  });
}

inline int cmd_match(const Options &opt, std::ostream &out, std::ostream &err) {
  return guarded(err, [&] {
    const RunConfig c = effective_config(opt);
    const auto scenes =
        with_boxes(read_scene_file(opt.scenes), opt.overwrite_boxes, err);
    std::vector<SceneMatch> matches(scenes.size());
    parallel_for(scenes.size(), c.threads,
                 [&](std::size_t i) { matches[i] = match_scene(scenes[i], c); });
    std::ostringstream os;
    for (const auto &m : matches) {
      nlohmann::json j = {{"scene_id", m.scene_id}};
      if (m.skipped) {
        j["skipped"] = *m.skipped;
      } else {
        nlohmann::json pairs = nlohmann::json::array();
        for (std::size_t k = 0; k < m.assignment.pairs.size(); ++k)
          pairs.push_back({{"pred", m.assignment.pairs[k].first},
                           {"gt", m.assignment.pairs[k].second},
                           {"cost", breakdown_to_json(m.pair_costs[k])}});
        j["pairs"] = pairs;
        j["unmatched_predictions"] = m.assignment.unmatched_predictions;
        j["total_cost"] = m.assignment.total_cost;
      }
      os << j.dump() << '\n';
    }
    write_text(opt.out, os.str(), out);
  });
}

inline int cmd_synth(const Options &opt, std::ostream &out, std::ostream &err) {
  return guarded(err, [&] {
    const RunConfig c = effective_config(opt);
    NoiseProfile noise = c.noise_profile(c.synth.profile);
    noise.seed = c.seed;
    const auto scenes = generate_synthetic(synth_spec(c, opt.count), noise);
    write_text(opt.out, serialize_scenes(scenes), out);
  });
}

/// Head-space view of a scene prediction: every class slice carries the
/// predicted rotation and scale, logits come from the class probabilities.
inline RawHeadOutput to_head_output(const PredInstance &p,
                                    const MatchCandidate &m,
                                    const CameraIntrinsics &cam) {
  const Eigen::Index n = static_cast<Eigen::Index>(m.class_probs.size());
  RawHeadOutput raw;
  raw.class_logits.resize(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const double q = std::clamp(m.class_probs[k], 1e-7, 1.0 - 1e-7);
    raw.class_logits(k) = std::log(q / (1.0 - q));
  }
  raw.box = m.box;
  const Projection pr = project_point(p.pose.translation, cam);
  raw.center_offset = Vec2(pr.center.x - m.box.cx, pr.center.y - m.box.cy);
  raw.depth = pr.depth;
  const Rotation6D r6 = matrix_to_rot6d(p.pose.rotation);
  raw.rot6d_per_class.resize(n, 6);
  raw.scale_per_class.resize(n, 3);
  for (Eigen::Index k = 0; k < n; ++k) {
    raw.rot6d_per_class.row(k) << r6.a1.transpose(), r6.a2.transpose();
    raw.scale_per_class.row(k) = p.pose.scale.transpose();
  }
  return raw;
}

inline nlohmann::json loss_to_json(const LossBreakdown &b) {
  return {{"cls", b.cls},           {"bbox", b.bbox},
          {"iou", b.iou},           {"center2d", b.center2d},
          {"depth", b.depth},       {"rot", b.rot},
          {"scale", b.scale},       {"total", b.total},
          {"pairs", b.pairs},       {"unmatched", b.unmatched},
          {"singular_rotations", b.singular_rotations}};
}

struct SceneLoss {
  std::string scene_id;
  std::optional<std::string> skipped;
  LossBreakdown loss;
};

inline SceneLoss scene_loss(const SceneRecord &sc, const RunConfig &c) {
  SceneLoss out;
  out.scene_id = sc.scene_id;
  const SceneMatch m = match_scene(sc, c);
  if (m.skipped) {
    out.skipped = m.skipped;
    return out;
  }
  std::vector<RawHeadOutput> heads;
  for (std::size_t i = 0; i < sc.preds.size(); ++i)
    heads.push_back(to_head_output(sc.preds[i], m.preds[i], sc.intrinsics));
  std::vector<LossTarget> targets;
  for (std::size_t j = 0; j < sc.gts.size(); ++j)
    targets.push_back(LossTarget::from_pose(m.gts[j].category, sc.gts[j].pose,
                                            m.gts[j].box, sc.intrinsics));
  LossOptions lo;
  lo.focal = c.focal;
  lo.rotation_symmetry = c.loss_rotation_symmetry;
  lo.symmetry = [&c](int k) -> const SymmetrySpec & {
    return c.eval.symmetry_of(c.categories()[k]);
  };
  out.loss = total_loss(m.assignment.pairs, heads, targets, c.loss_weights, lo);
  return out;
}

inline int cmd_losses(const Options &opt, std::ostream &out, std::ostream &err) {
  return guarded(err, [&] {
    const RunConfig c = effective_config(opt);
    const auto scenes =
        with_boxes(read_scene_file(opt.scenes), opt.overwrite_boxes, err);
    std::vector<SceneLoss> losses(scenes.size());
    parallel_for(scenes.size(), c.threads,
                 [&](std::size_t i) { losses[i] = scene_loss(scenes[i], c); });
    nlohmann::json per_scene = nlohmann::json::array();
    LossBreakdown agg;
    std::size_t evaluated = 0;
    for (const auto &l : losses) {
      if (l.skipped) {
        per_scene.push_back({{"scene_id", l.scene_id}, {"skipped", *l.skipped}});
        continue;
      }
      ++evaluated;
      per_scene.push_back({{"scene_id", l.scene_id}, {"loss", loss_to_json(l.loss)}});
      agg.cls += l.loss.cls;
      agg.bbox += l.loss.bbox;
      agg.iou += l.loss.iou;
      agg.center2d += l.loss.center2d;
      agg.depth += l.loss.depth;
      agg.rot += l.loss.rot;
      agg.scale += l.loss.scale;
      agg.total += l.loss.total;
      agg.pairs += l.loss.pairs;
      agg.unmatched += l.loss.unmatched;
      agg.singular_rotations += l.loss.singular_rotations;
    }
    nlohmann::json doc = {{"scenes", per_scene},
                          {"aggregate", loss_to_json(agg)},
                          {"evaluated_scenes", evaluated},
                          {"config", config_to_json(c, false)}};
    write_text(opt.out, doc.dump(2) + "\n", out);
  });
}

} // namespace posekit::cli
