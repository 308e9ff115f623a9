// SPDX-License-Identifier: Apache-2.0
/**
 * @file   config.hpp
 * @brief  Run configuration: weights, evaluation settings, symmetry table
 *         and synthetic noise profiles. Stored as JSON; unknown keys are
 *         rejected at every level.
 */
#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "posekit/error.hpp"
#include "posekit/losses.hpp"
#include "posekit/matching.hpp"
#include "posekit/metrics.hpp"
#include "posekit/scene_io.hpp"

namespace posekit {

inline constexpr const char *kConfigVersion = "1";

struct SynthConfig {
  int min_objects = 1;
  int max_objects = 10;
  CameraIntrinsics intrinsics{577.5, 577.5, 319.5, 239.5, 640.0, 480.0};
  std::string profile = "perfect";
  std::map<std::string, NoiseProfile> profiles;

  bool operator==(const SynthConfig &) const = default;
};

struct RunConfig {
  std::uint64_t seed = 0;
  /// 0 selects the hardware concurrency. Not echoed into reports.
  unsigned threads = 0;
  CostWeights cost_weights;
  LossWeights loss_weights;
  FocalParams focal;
  bool loss_rotation_symmetry = false;
  /// Also carries the category list and the symmetry table.
  EvalConfig eval;
  SynthConfig synth;

  const std::vector<std::string> &categories() const { return eval.categories; }

  void validate() const {
    cost_weights.validate();
    loss_weights.validate();
    eval.validate();
    if (!(focal.alpha >= 0.0 && focal.alpha <= 1.0) || !(focal.gamma >= 0.0))
      throw Error(ErrorKind::InvariantError,
                  "focal alpha must be in [0,1] and gamma >= 0");
    for (const auto &[name, sym] : eval.symmetry)
      if (eval.category_index(name) < 0)
        throw Error(ErrorKind::InvariantError,
                    "symmetry entry for unknown category '" + name + "'", 0,
                    "symmetry." + name);
    synth.intrinsics.validate();
    if (synth.min_objects < 0 || synth.max_objects < synth.min_objects)
      throw Error(ErrorKind::InvariantError, "invalid objects-per-scene range",
                  0, "synth");
    for (const auto &[name, p] : synth.profiles)
      p.validate();
  }

  const NoiseProfile &noise_profile(const std::string &name) const {
    auto it = synth.profiles.find(name);
    if (it == synth.profiles.end())
      throw Error(ErrorKind::InvariantError,
                  "unknown noise profile '" + name + "'", 0, "synth.profiles");
    return it->second;
  }

  bool operator==(const RunConfig &o) const {
    return seed == o.seed && threads == o.threads &&
           cost_weights == o.cost_weights && loss_weights == o.loss_weights &&
           focal == o.focal &&
           loss_rotation_symmetry == o.loss_rotation_symmetry &&
           eval.categories == o.eval.categories &&
           eval.iou_thresholds == o.eval.iou_thresholds &&
           eval.pose_thresholds == o.eval.pose_thresholds &&
           eval.symmetry == o.eval.symmetry &&
           eval.pose_iou_gate == o.eval.pose_iou_gate &&
           eval.symmetric_iou == o.eval.symmetric_iou &&
           eval.symmetric_iou_options.steps == o.eval.symmetric_iou_options.steps &&
           eval.symmetric_iou_options.refine ==
               o.eval.symmetric_iou_options.refine &&
           eval.ap_method == o.eval.ap_method && synth == o.synth;
  }
};

/// Matching weights (2, 5, 2, 5, 2), loss weights with depth 50, rotation 5
/// and scale 5, the six NOCS categories with bottle/bowl/can symmetric about
/// their y-axis, and a rotation-noise sweep among the synthetic profiles.
inline RunConfig default_config() {
  RunConfig c;
  c.eval.categories = {"bottle", "bowl", "camera", "can", "laptop", "mug"};
  for (const char *name : {"bottle", "bowl", "can"})
    c.eval.symmetry[name] = SymmetrySpec::continuous(Vec3::UnitY());
  c.synth.profiles["perfect"] = NoiseProfile{};
  for (double sigma : {1.0, 5.0, 10.0, 20.0, 45.0}) {
    NoiseProfile p;
    p.rotation_deg = sigma;
    std::ostringstream name;
    name << "rot" << sigma;
    c.synth.profiles[name.str()] = p;
  }
  NoiseProfile realistic;
  realistic.rotation_deg = 8.0;
  realistic.translation_m = 0.03;
  realistic.scale_rel = 0.1;
  realistic.drop_rate = 0.1;
  realistic.false_positive_rate = 0.2;
  c.synth.profiles["realistic"] = realistic;
  return c;
}

// ---------------------------------------------------------------------------
// JSON mapping

namespace detail {

class ConfigReader {
public:
  [[noreturn]] void fail(const std::string &path, const std::string &msg) const {
    throw Error(ErrorKind::SchemaError, msg, 0, path);
  }

  const nlohmann::json &object(const nlohmann::json &j, const std::string &path,
                               std::initializer_list<const char *> keys) const {
    if (!j.is_object())
      fail(path, "expected an object");
    for (auto it = j.begin(); it != j.end(); ++it) {
      bool known = false;
      for (const char *k : keys)
        known |= it.key() == k;
      if (!known)
        fail(join(path, it.key()), "unknown key");
    }
    return j;
  }

  template <typename T>
  void read(const nlohmann::json &obj, const char *key, const std::string &path,
            T &out) const {
    auto it = obj.find(key);
    if (it == obj.end())
      return;
    try {
      out = it->get<T>();
    } catch (const nlohmann::json::exception &) {
      fail(join(path, key), "wrong type");
    }
  }

  void read_number(const nlohmann::json &obj, const char *key,
                   const std::string &path, double &out) const {
    auto it = obj.find(key);
    if (it == obj.end())
      return;
    if (!it->is_number())
      fail(join(path, key), "expected a number");
    out = it->get<double>();
  }

  static std::string join(const std::string &path, const std::string &key) {
    return path.empty() ? key : path + "." + key;
  }
};

inline nlohmann::json symmetry_to_json(const SymmetrySpec &s) {
  switch (s.kind) {
  case SymmetrySpec::Kind::None:
    return {{"type", "none"}};
  case SymmetrySpec::Kind::Continuous:
    return {{"type", "continuous"}, {"axis", {s.axis.x(), s.axis.y(), s.axis.z()}}};
  case SymmetrySpec::Kind::Discrete:
    return {{"type", "discrete"},
            {"axis", {s.axis.x(), s.axis.y(), s.axis.z()}},
            {"folds", s.elements.size() + 1}};
  }
  return nullptr;
}

inline SymmetrySpec symmetry_from_json(const ConfigReader &rd,
                                       const nlohmann::json &j,
                                       const std::string &path) {
  rd.object(j, path, {"type", "axis", "folds"});
  std::string type = "none";
  rd.read(j, "type", path, type);
  std::vector<double> axis{0.0, 1.0, 0.0};
  rd.read(j, "axis", path, axis);
  if (axis.size() != 3 || Vec3(axis[0], axis[1], axis[2]).norm() == 0.0)
    rd.fail(path + ".axis", "axis must be a non-zero 3-vector");
  const Vec3 a(axis[0], axis[1], axis[2]);
  if (type == "none")
    return SymmetrySpec::none();
  if (type == "continuous")
    return SymmetrySpec::continuous(a);
  if (type == "discrete") {
    int folds = 2;
    rd.read(j, "folds", path, folds);
    if (folds < 2)
      rd.fail(path + ".folds", "folds must be >= 2");
    return SymmetrySpec::n_fold(a, folds);
  }
  rd.fail(path + ".type", "expected none, continuous or discrete");
}

inline nlohmann::json noise_to_json(const NoiseProfile &p) {
  return {{"rotation_deg", p.rotation_deg},
          {"translation_m", p.translation_m},
          {"scale_rel", p.scale_rel},
          {"drop_rate", p.drop_rate},
          {"false_positive_rate", p.false_positive_rate},
          {"confidence_model", p.confidence_model}};
}

inline NoiseProfile noise_from_json(const ConfigReader &rd,
                                    const nlohmann::json &j,
                                    const std::string &path) {
  rd.object(j, path,
            {"rotation_deg", "translation_m", "scale_rel", "drop_rate",
             "false_positive_rate", "confidence_model"});
  NoiseProfile p;
  rd.read_number(j, "rotation_deg", path, p.rotation_deg);
  rd.read_number(j, "translation_m", path, p.translation_m);
  rd.read_number(j, "scale_rel", path, p.scale_rel);
  rd.read_number(j, "drop_rate", path, p.drop_rate);
  rd.read_number(j, "false_positive_rate", path, p.false_positive_rate);
  rd.read(j, "confidence_model", path, p.confidence_model);
  return p;
}

inline nlohmann::json intrinsics_to_json(const CameraIntrinsics &k) {
  return {{"fx", k.fx}, {"fy", k.fy},       {"cx", k.cx},
          {"cy", k.cy}, {"width", k.width}, {"height", k.height}};
}

} // namespace detail

/// JSON form of a config. `include_threads` is off for report echoes so
/// that reports do not depend on the thread count.
inline nlohmann::json config_to_json(const RunConfig &c,
                                     bool include_threads = true) {
  using nlohmann::json;
  json j;
  j["version"] = kConfigVersion;
  j["seed"] = c.seed;
  if (include_threads)
    j["threads"] = c.threads;
  j["categories"] = c.eval.categories;
  json sym = json::object();
  for (const auto &[name, s] : c.eval.symmetry)
    sym[name] = detail::symmetry_to_json(s);
  j["symmetry"] = sym;
  const auto &w = c.cost_weights;
  j["cost_weights"] = {{"cls", w.cls},     {"bbox", w.bbox}, {"iou", w.iou},
                       {"trans", w.trans}, {"rot", w.rot}};
  const auto &l = c.loss_weights;
  j["loss_weights"] = {{"cls", l.cls},     {"bbox", l.bbox},
                       {"iou", l.iou},     {"center2d", l.center2d},
                       {"depth", l.depth}, {"rot", l.rot},
                       {"scale", l.scale}};
  j["focal"] = {{"alpha", c.focal.alpha}, {"gamma", c.focal.gamma}};
  j["loss_rotation_symmetry"] = c.loss_rotation_symmetry;
  json pts = json::array();
  for (const auto &p : c.eval.pose_thresholds)
    pts.push_back({{"degrees", threshold_to_json(p.degrees)},
                   {"centimeters", threshold_to_json(p.centimeters)}});
  j["eval"] = {{"iou_thresholds", c.eval.iou_thresholds},
               {"pose_thresholds", pts},
               {"pose_iou_gate", c.eval.pose_iou_gate},
               {"symmetric_iou", c.eval.symmetric_iou},
               {"symmetry_steps", c.eval.symmetric_iou_options.steps},
               {"symmetry_refine", c.eval.symmetric_iou_options.refine},
               {"ap_method", c.eval.ap_method}};
  json profiles = json::object();
  for (const auto &[name, p] : c.synth.profiles)
    profiles[name] = detail::noise_to_json(p);
  j["synth"] = {{"min_objects", c.synth.min_objects},
                {"max_objects", c.synth.max_objects},
                {"intrinsics", detail::intrinsics_to_json(c.synth.intrinsics)},
                {"profile", c.synth.profile},
                {"profiles", profiles}};
  return j;
}

/// Keys absent from `j` keep their default_config() values, except that a
/// present "symmetry" or "synth.profiles" table replaces the default one.
inline RunConfig config_from_json(const nlohmann::json &j) {
  detail::ConfigReader rd;
  RunConfig c = default_config();
  rd.object(j, "",
            {"version", "seed", "threads", "categories", "symmetry",
             "cost_weights", "loss_weights", "focal", "loss_rotation_symmetry",
             "eval", "synth"});
  std::string version = kConfigVersion;
  rd.read(j, "version", "", version);
  if (version != kConfigVersion)
    rd.fail("version", "unsupported config version '" + version + "'");
  rd.read(j, "seed", "", c.seed);
  rd.read(j, "threads", "", c.threads);
  rd.read(j, "categories", "", c.eval.categories);
  if (auto it = j.find("symmetry"); it != j.end()) {
    if (!it->is_object())
      rd.fail("symmetry", "expected an object");
    c.eval.symmetry.clear();
    for (auto s = it->begin(); s != it->end(); ++s)
      c.eval.symmetry[s.key()] =
          detail::symmetry_from_json(rd, s.value(), "symmetry." + s.key());
  }
  if (auto it = j.find("cost_weights"); it != j.end()) {
    const auto &o = rd.object(*it, "cost_weights",
                              {"cls", "bbox", "iou", "trans", "rot"});
    auto &w = c.cost_weights;
    rd.read_number(o, "cls", "cost_weights", w.cls);
    rd.read_number(o, "bbox", "cost_weights", w.bbox);
    rd.read_number(o, "iou", "cost_weights", w.iou);
    rd.read_number(o, "trans", "cost_weights", w.trans);
    rd.read_number(o, "rot", "cost_weights", w.rot);
  }
  if (auto it = j.find("loss_weights"); it != j.end()) {
    const auto &o = rd.object(
        *it, "loss_weights",
        {"cls", "bbox", "iou", "center2d", "depth", "rot", "scale"});
    auto &w = c.loss_weights;
    rd.read_number(o, "cls", "loss_weights", w.cls);
    rd.read_number(o, "bbox", "loss_weights", w.bbox);
    rd.read_number(o, "iou", "loss_weights", w.iou);
    rd.read_number(o, "center2d", "loss_weights", w.center2d);
    rd.read_number(o, "depth", "loss_weights", w.depth);
    rd.read_number(o, "rot", "loss_weights", w.rot);
    rd.read_number(o, "scale", "loss_weights", w.scale);
  }
  if (auto it = j.find("focal"); it != j.end()) {
    const auto &o = rd.object(*it, "focal", {"alpha", "gamma"});
    rd.read_number(o, "alpha", "focal", c.focal.alpha);
    rd.read_number(o, "gamma", "focal", c.focal.gamma);
  }
  rd.read(j, "loss_rotation_symmetry", "", c.loss_rotation_symmetry);
  if (auto it = j.find("eval"); it != j.end()) {
    const auto &o = rd.object(
        *it, "eval",
        {"iou_thresholds", "pose_thresholds", "pose_iou_gate", "symmetric_iou",
         "symmetry_steps", "symmetry_refine", "ap_method"});
    rd.read(o, "iou_thresholds", "eval", c.eval.iou_thresholds);
    if (auto pt = o.find("pose_thresholds"); pt != o.end()) {
      if (!pt->is_array())
        rd.fail("eval.pose_thresholds", "expected an array");
      c.eval.pose_thresholds.clear();
      for (std::size_t k = 0; k < pt->size(); ++k) {
        const std::string path = "eval.pose_thresholds[" + std::to_string(k) + "]";
        const auto &e = rd.object((*pt)[k], path, {"degrees", "centimeters"});
        PoseThreshold t{kUnbounded, kUnbounded};
        for (auto [key, dst] : {std::pair{"degrees", &t.degrees},
                                std::pair{"centimeters", &t.centimeters}}) {
          auto f = e.find(key);
          if (f == e.end() || f->is_null())
            continue;
          if (!f->is_number())
            rd.fail(path + "." + key, "expected a number or null");
          *dst = f->get<double>();
        }
        c.eval.pose_thresholds.push_back(t);
      }
    }
    rd.read_number(o, "pose_iou_gate", "eval", c.eval.pose_iou_gate);
    rd.read(o, "symmetric_iou", "eval", c.eval.symmetric_iou);
    rd.read(o, "symmetry_steps", "eval", c.eval.symmetric_iou_options.steps);
    rd.read(o, "symmetry_refine", "eval", c.eval.symmetric_iou_options.refine);
    rd.read(o, "ap_method", "eval", c.eval.ap_method);
  }
  if (auto it = j.find("synth"); it != j.end()) {
    const auto &o = rd.object(
        *it, "synth",
        {"min_objects", "max_objects", "intrinsics", "profile", "profiles"});
    rd.read(o, "min_objects", "synth", c.synth.min_objects);
    rd.read(o, "max_objects", "synth", c.synth.max_objects);
    if (auto k = o.find("intrinsics"); k != o.end()) {
      const auto &ko = rd.object(*k, "synth.intrinsics",
                                 {"fx", "fy", "cx", "cy", "width", "height"});
      auto &in = c.synth.intrinsics;
      rd.read_number(ko, "fx", "synth.intrinsics", in.fx);
      rd.read_number(ko, "fy", "synth.intrinsics", in.fy);
      rd.read_number(ko, "cx", "synth.intrinsics", in.cx);
      rd.read_number(ko, "cy", "synth.intrinsics", in.cy);
      rd.read_number(ko, "width", "synth.intrinsics", in.width);
      rd.read_number(ko, "height", "synth.intrinsics", in.height);
    }
    rd.read(o, "profile", "synth", c.synth.profile);
    if (auto p = o.find("profiles"); p != o.end()) {
      if (!p->is_object())
        rd.fail("synth.profiles", "expected an object");
      c.synth.profiles.clear();
      for (auto e = p->begin(); e != p->end(); ++e)
        c.synth.profiles[e.key()] =
            detail::noise_from_json(rd, e.value(), "synth.profiles." + e.key());
    }
  }
  c.validate();
  return c;
}

inline RunConfig load_config(const std::string &path) {
  std::ifstream in(path);
  if (!in)
    throw Error(ErrorKind::IoError, "cannot open config '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error &e) {
    throw Error(ErrorKind::SchemaError,
                "config '" + path + "' is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

inline SynthSpec synth_spec(const RunConfig &c, std::size_t scenes) {
  SynthSpec s;
  s.scenes = scenes;
  s.min_objects = c.synth.min_objects;
  s.max_objects = c.synth.max_objects;
  s.intrinsics = c.synth.intrinsics;
  s.categories = c.eval.categories;
  return s;
}

} // namespace posekit
