// SPDX-License-Identifier: Apache-2.0
/**
 * @file   scene_io.hpp
 * @brief  Scene file reading/writing, 2D box derivation and the synthetic
 *         scene generator.
 *
 * Scene files hold one JSON object per line:
 *
 *   {"schema_version": "1", "scene_id": "...",
 *    "intrinsics": {"fx", "fy", "cx", "cy", "width", "height"},
 *    "gts":   [{"category", "pose", "box"?}],
 *    "preds": [{"category", "confidence", "pose", "box"?, "scores"?}]}
 *
 * A pose is {"rotation": 9 row-major floats, "translation": 3 floats (m),
 * "scale": 3 floats (m, full extent)}; a box is normalized {"cx","cy","w","h"}.
 * Unknown keys at scene and instance level are carried through unchanged.
 */
#pragma once

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <optional>
#include <ostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "posekit/error.hpp"
#include "posekit/geometry.hpp"
#include "posekit/scene.hpp"

namespace posekit {

inline constexpr const char *kSchemaVersion = "1";

/// Tolerance for rotations read from files, which may carry rounded values.
inline constexpr double kFileRotationTolerance = 1e-6;

namespace detail {

class RecordReader {
public:
  explicit RecordReader(std::size_t line) : line_(line) {}

  [[noreturn]] void schema(const std::string &path, const std::string &msg) const {
    throw Error(ErrorKind::SchemaError, msg, line_, path);
  }
  [[noreturn]] void invariant(const std::string &path,
                              const std::string &msg) const {
    throw Error(ErrorKind::InvariantError, msg, line_, path);
  }

  const nlohmann::json &field(const nlohmann::json &obj, const char *key,
                              const std::string &path) const {
    auto it = obj.find(key);
    if (it == obj.end())
      schema(join(path, key), "missing required field");
    return *it;
  }

  double number(const nlohmann::json &j, const std::string &path) const {
    if (!j.is_number())
      schema(path, "expected a number");
    const double v = j.get<double>();
    if (!std::isfinite(v))
      invariant(path, "value must be finite");
    return v;
  }

  std::string string(const nlohmann::json &j, const std::string &path) const {
    if (!j.is_string())
      schema(path, "expected a string");
    return j.get<std::string>();
  }

  std::vector<double> numbers(const nlohmann::json &j, std::size_t n,
                              const std::string &path) const {
    if (!j.is_array() || (n > 0 && j.size() != n))
      schema(path, n > 0 ? "expected an array of " + std::to_string(n) +
                               " numbers"
                         : "expected an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < j.size(); ++i)
      out.push_back(number(j[i], path + "[" + std::to_string(i) + "]"));
    return out;
  }

  void only_keys(const nlohmann::json &obj, std::initializer_list<const char *> keys,
                 const std::string &path) const {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
      bool known = false;
      for (const char *k : keys)
        known |= it.key() == k;
      if (!known)
        schema(join(path, it.key().c_str()), "unknown field");
    }
  }

  static std::string join(const std::string &path, const char *key) {
    return path.empty() ? key : path + "." + key;
  }

  const nlohmann::json &object(const nlohmann::json &j, const std::string &path) const {
    if (!j.is_object())
      schema(path, "expected an object");
    return j;
  }

private:
  std::size_t line_;
};

inline CameraIntrinsics read_intrinsics(const RecordReader &rd,
                                        const nlohmann::json &j,
                                        const std::string &path) {
  rd.object(j, path);
  rd.only_keys(j, {"fx", "fy", "cx", "cy", "width", "height"}, path);
  CameraIntrinsics k;
  k.fx = rd.number(rd.field(j, "fx", path), path + ".fx");
  k.fy = rd.number(rd.field(j, "fy", path), path + ".fy");
  k.cx = rd.number(rd.field(j, "cx", path), path + ".cx");
  k.cy = rd.number(rd.field(j, "cy", path), path + ".cy");
  k.width = rd.number(rd.field(j, "width", path), path + ".width");
  k.height = rd.number(rd.field(j, "height", path), path + ".height");
  for (auto [v, name] : {std::pair{k.fx, "fx"}, std::pair{k.fy, "fy"},
                         std::pair{k.width, "width"},
                         std::pair{k.height, "height"}})
    if (!(v > 0.0))
      rd.invariant(path + "." + name, "must be positive");
  return k;
}

inline Pose9D read_pose(const RecordReader &rd, const nlohmann::json &j,
                        const std::string &path) {
  rd.object(j, path);
  rd.only_keys(j, {"rotation", "translation", "scale"}, path);
  const auto r = rd.numbers(rd.field(j, "rotation", path), 9, path + ".rotation");
  const auto t =
      rd.numbers(rd.field(j, "translation", path), 3, path + ".translation");
  const auto s = rd.numbers(rd.field(j, "scale", path), 3, path + ".scale");
  Mat3 m;
  m << r[0], r[1], r[2], r[3], r[4], r[5], r[6], r[7], r[8];
  if (!RotationMatrix::is_rotation(m, kFileRotationTolerance))
    rd.invariant(path + ".rotation", "not a proper rotation matrix");
  Pose9D pose;
  pose.rotation = RotationMatrix::from_matrix(m, kFileRotationTolerance);
  pose.translation = Vec3(t[0], t[1], t[2]);
  pose.scale = Vec3(s[0], s[1], s[2]);
  for (int i = 0; i < 3; ++i)
    if (!(pose.scale[i] > 0.0))
      rd.invariant(path + ".scale[" + std::to_string(i) + "]",
                   "scale must be positive");
  return pose;
}

inline BBox2D read_box(const RecordReader &rd, const nlohmann::json &j,
                       const std::string &path) {
  rd.object(j, path);
  rd.only_keys(j, {"cx", "cy", "w", "h"}, path);
  BBox2D b{rd.number(rd.field(j, "cx", path), path + ".cx"),
           rd.number(rd.field(j, "cy", path), path + ".cy"),
           rd.number(rd.field(j, "w", path), path + ".w"),
           rd.number(rd.field(j, "h", path), path + ".h")};
  if (!b.valid())
    rd.invariant(path, "box must have center in [0,1] and size in (0,1]");
  return b;
}

inline nlohmann::json extras(const nlohmann::json &obj,
                             std::initializer_list<const char *> known) {
  nlohmann::json out = nlohmann::json::object();
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool k = false;
    for (const char *name : known)
      k |= it.key() == name;
    if (!k)
      out[it.key()] = it.value();
  }
  return out;
}

inline nlohmann::json pose_to_json(const Pose9D &p) {
  const Mat3 &m = p.rotation.matrix();
  return {{"rotation",
           {m(0, 0), m(0, 1), m(0, 2), m(1, 0), m(1, 1), m(1, 2), m(2, 0),
            m(2, 1), m(2, 2)}},
          {"translation", {p.translation.x(), p.translation.y(), p.translation.z()}},
          {"scale", {p.scale.x(), p.scale.y(), p.scale.z()}}};
}

inline nlohmann::json box_to_json(const BBox2D &b) {
  return {{"cx", b.cx}, {"cy", b.cy}, {"w", b.w}, {"h", b.h}};
}

} // namespace detail

/// Parses one record; `line` is reported in errors.
inline SceneRecord parse_scene_record(const std::string &text, std::size_t line) {
  detail::RecordReader rd(line);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error &e) {
    rd.schema("", std::string("malformed record: ") + e.what());
  }
  rd.object(j, "");
  SceneRecord sc;
  if (auto it = j.find("schema_version"); it != j.end()) {
    if (rd.string(*it, "schema_version") != kSchemaVersion)
      rd.schema("schema_version", "unsupported schema version");
  }
  sc.scene_id = rd.string(rd.field(j, "scene_id", ""), "scene_id");
  sc.intrinsics =
      detail::read_intrinsics(rd, rd.field(j, "intrinsics", ""), "intrinsics");

  const auto &gts = rd.field(j, "gts", "");
  if (!gts.is_array())
    rd.schema("gts", "expected an array");
  for (std::size_t i = 0; i < gts.size(); ++i) {
    const std::string path = "gts[" + std::to_string(i) + "]";
    const auto &g = rd.object(gts[i], path);
    GtInstance gi;
    gi.category = rd.string(rd.field(g, "category", path), path + ".category");
    gi.pose = detail::read_pose(rd, rd.field(g, "pose", path), path + ".pose");
    if (auto it = g.find("box"); it != g.end() && !it->is_null())
      gi.box = detail::read_box(rd, *it, path + ".box");
    gi.extra = detail::extras(g, {"category", "pose", "box"});
    sc.gts.push_back(std::move(gi));
  }

  const auto &preds = rd.field(j, "preds", "");
  if (!preds.is_array())
    rd.schema("preds", "expected an array");
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const std::string path = "preds[" + std::to_string(i) + "]";
    const auto &p = rd.object(preds[i], path);
    PredInstance pi;
    pi.category = rd.string(rd.field(p, "category", path), path + ".category");
    pi.confidence =
        rd.number(rd.field(p, "confidence", path), path + ".confidence");
    if (!(pi.confidence >= 0.0 && pi.confidence <= 1.0))
      rd.invariant(path + ".confidence", "confidence must be in [0, 1]");
    pi.pose = detail::read_pose(rd, rd.field(p, "pose", path), path + ".pose");
    if (auto it = p.find("box"); it != p.end() && !it->is_null())
      pi.box = detail::read_box(rd, *it, path + ".box");
    if (auto it = p.find("scores"); it != p.end() && !it->is_null()) {
      pi.scores = rd.numbers(*it, 0, path + ".scores");
      for (double s : *pi.scores)
        if (!(s >= 0.0 && s <= 1.0))
          rd.invariant(path + ".scores", "scores must be in [0, 1]");
    }
    pi.extra =
        detail::extras(p, {"category", "confidence", "pose", "box", "scores"});
    sc.preds.push_back(std::move(pi));
  }
  sc.extra = detail::extras(
      j, {"schema_version", "scene_id", "intrinsics", "gts", "preds"});
  return sc;
}

/// Reads newline-delimited records. Blank lines are skipped; scene ids must
/// be unique.
inline std::vector<SceneRecord> parse_scenes(std::istream &in) {
  std::vector<SceneRecord> out;
  std::set<std::string> ids;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos)
      continue;
    SceneRecord sc = parse_scene_record(text, line);
    if (!ids.insert(sc.scene_id).second)
      throw Error(ErrorKind::InvariantError,
                  "duplicate scene id '" + sc.scene_id + "'", line, "scene_id");
    out.push_back(std::move(sc));
  }
  return out;
}

inline std::vector<SceneRecord> parse_scenes(const std::string &text) {
  std::istringstream in(text);
  return parse_scenes(in);
}

inline nlohmann::json scene_to_json(const SceneRecord &sc) {
  using nlohmann::json;
  json j = sc.extra.is_object() ? sc.extra : json::object();
  j["schema_version"] = kSchemaVersion;
  j["scene_id"] = sc.scene_id;
  const auto &k = sc.intrinsics;
  j["intrinsics"] = {{"fx", k.fx}, {"fy", k.fy},       {"cx", k.cx},
                     {"cy", k.cy}, {"width", k.width}, {"height", k.height}};
  json gts = json::array();
  for (const auto &g : sc.gts) {
    json gj = g.extra.is_object() ? g.extra : json::object();
    gj["category"] = g.category;
    gj["pose"] = detail::pose_to_json(g.pose);
    if (g.box)
      gj["box"] = detail::box_to_json(*g.box);
    gts.push_back(std::move(gj));
  }
  j["gts"] = std::move(gts);
  json preds = json::array();
  for (const auto &p : sc.preds) {
    json pj = p.extra.is_object() ? p.extra : json::object();
    pj["category"] = p.category;
    pj["confidence"] = p.confidence;
    pj["pose"] = detail::pose_to_json(p.pose);
    if (p.box)
      pj["box"] = detail::box_to_json(*p.box);
    if (p.scores)
      pj["scores"] = *p.scores;
    preds.push_back(std::move(pj));
  }
  j["preds"] = std::move(preds);
  return j;
}

inline std::string serialize_scene(const SceneRecord &sc) {
  return scene_to_json(sc).dump();
}

inline void write_scenes(std::ostream &out, const std::vector<SceneRecord> &scenes) {
  for (const auto &sc : scenes)
    out << serialize_scene(sc) << '\n';
}

inline std::string serialize_scenes(const std::vector<SceneRecord> &scenes) {
  std::ostringstream os;
  write_scenes(os, scenes);
  return os.str();
}

// ---------------------------------------------------------------------------
// Box derivation

struct BoxFailure {
  std::string scene_id;
  bool is_prediction = false;
  std::size_t index = 0;
  std::string message;
};

struct BoxDerivation {
  std::vector<SceneRecord> scenes;
  std::vector<BoxFailure> failures;
};

/// Fills 2D boxes by projecting each instance cuboid. Existing boxes are
/// kept unless `overwrite` is set. Instances behind the camera are reported
/// and left without a box.
inline BoxDerivation derive_boxes(std::vector<SceneRecord> scenes,
                                  bool overwrite = false) {
  BoxDerivation out;
  auto fill = [&](const SceneRecord &sc, const Pose9D &pose,
                  std::optional<BBox2D> &box, bool pred, std::size_t i) {
    if (box && !overwrite)
      return;
    try {
      const BBox2D b = project_cuboid_to_bbox(pose, sc.intrinsics);
      if (!b.valid())
        throw Error(ErrorKind::BehindCamera, "cuboid projects outside the image");
      box = b;
    } catch (const Error &e) {
      out.failures.push_back({sc.scene_id, pred, i, e.what()});
    }
  };
  for (auto &sc : scenes) {
    for (std::size_t i = 0; i < sc.gts.size(); ++i)
      fill(sc, sc.gts[i].pose, sc.gts[i].box, false, i);
    for (std::size_t i = 0; i < sc.preds.size(); ++i)
      fill(sc, sc.preds[i].pose, sc.preds[i].box, true, i);
  }
  out.scenes = std::move(scenes);
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic scenes

struct NoiseProfile {
  double rotation_deg = 0.0;   // std of the perturbation angle
  double translation_m = 0.0;  // per-axis std
  double scale_rel = 0.0;      // per-axis relative std
  double drop_rate = 0.0;      // probability a GT gets no prediction
  double false_positive_rate = 0.0; // expected false positives per GT
  /// Only "exp": exp(-(angle / 10 deg + |dt| / 0.1 m)).
  std::string confidence_model = "exp";
  std::uint64_t seed = 0;

  void validate() const {
    for (double v : {rotation_deg, translation_m, scale_rel})
      if (!(v >= 0.0) || !std::isfinite(v))
        throw Error(ErrorKind::InvariantError, "noise stds must be >= 0");
    for (double v : {drop_rate, false_positive_rate})
      if (!(v >= 0.0 && v <= 1.0))
        throw Error(ErrorKind::InvariantError, "noise rates must be in [0, 1]");
    if (confidence_model != "exp")
      throw Error(ErrorKind::InvariantError,
                  "unknown confidence model '" + confidence_model + "'");
  }
  bool operator==(const NoiseProfile &) const = default;
};

struct SynthSpec {
  std::size_t scenes = 0;
  int min_objects = 1;
  int max_objects = 10;
  CameraIntrinsics intrinsics{577.5, 577.5, 319.5, 239.5, 640.0, 480.0};
  std::vector<std::string> categories;
};

/// Uniform rotation from a normalized Gaussian quaternion.
template <typename Rng> RotationMatrix random_rotation(Rng &rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::Quaterniond q;
  do {
    q = Eigen::Quaterniond(n(rng), n(rng), n(rng), n(rng));
  } while (q.norm() < 1e-9);
  q.normalize();
  return RotationMatrix::from_matrix(q.toRotationMatrix(), 1e-9);
}

template <typename Rng> Vec3 random_unit_vector(Rng &rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Vec3 v;
  do {
    v = Vec3(n(rng), n(rng), n(rng));
  } while (v.norm() < 1e-9);
  return v.normalized();
}

namespace detail {

template <typename Rng>
Pose9D random_frustum_pose(Rng &rng, const CameraIntrinsics &cam) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> depth(0.5, 5.0);
  std::uniform_real_distribution<double> extent(0.05, 0.5);
  const NormalizedCenter u{unit(rng), unit(rng)};
  const double z = depth(rng);
  Pose9D p;
  p.translation = backproject(u, z, cam);
  p.rotation = random_rotation(rng);
  p.scale = Vec3(extent(rng), extent(rng), extent(rng));
  return p;
}

inline std::optional<BBox2D> try_box(const Pose9D &pose,
                                     const CameraIntrinsics &cam) {
  try {
    const BBox2D b = project_cuboid_to_bbox(pose, cam);
    if (b.valid())
      return b;
  } catch (const Error &) {
  }
  return std::nullopt;
}

} // namespace detail

/// One synthetic scene. Scene `index` draws from its own generator seeded
/// with noise.seed + index.
inline SceneRecord generate_synthetic_scene(std::size_t index,
                                            const SynthSpec &spec,
                                            const NoiseProfile &noise) {
  std::mt19937_64 rng(noise.seed + index);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_int_distribution<int> count(spec.min_objects, spec.max_objects);
  std::uniform_int_distribution<std::size_t> pick(0, spec.categories.size() - 1);

  SceneRecord sc;
  char id[32];
  std::snprintf(id, sizeof id, "synth-%06zu", index);
  sc.scene_id = id;
  sc.intrinsics = spec.intrinsics;

  const int n = count(rng);
  for (int k = 0; k < n; ++k) {
    GtInstance g;
    g.category = spec.categories[pick(rng)];
    g.pose = detail::random_frustum_pose(rng, spec.intrinsics);
    g.box = detail::try_box(g.pose, spec.intrinsics);
    sc.gts.push_back(g);

    const bool dropped = unit(rng) < noise.drop_rate;
    const bool spurious = unit(rng) < noise.false_positive_rate;
    const Vec3 axis = random_unit_vector(rng);
    const double angle = deg_to_rad(noise.rotation_deg) * gauss(rng);
    const Vec3 dt(noise.translation_m * gauss(rng),
                  noise.translation_m * gauss(rng),
                  noise.translation_m * gauss(rng));
    const Vec3 ds(noise.scale_rel * gauss(rng), noise.scale_rel * gauss(rng),
                  noise.scale_rel * gauss(rng));
    if (!dropped) {
      PredInstance p;
      p.category = g.category;
      p.pose = g.pose;
      if (angle != 0.0)
        p.pose.rotation = RotationMatrix::about_axis(axis, angle) * g.pose.rotation;
      p.pose.translation = g.pose.translation + dt;
      for (int i = 0; i < 3; ++i)
        p.pose.scale[i] = std::max(1e-4, g.pose.scale[i] * (1.0 + ds[i]));
      p.confidence =
          std::exp(-(std::abs(angle) / deg_to_rad(10.0) + dt.norm() / 0.1));
      p.box = detail::try_box(p.pose, spec.intrinsics);
      sc.preds.push_back(std::move(p));
    }
    if (spurious) {
      PredInstance fp;
      fp.category = spec.categories[pick(rng)];
      fp.pose = detail::random_frustum_pose(rng, spec.intrinsics);
      fp.confidence = 0.5 * unit(rng);
      fp.box = detail::try_box(fp.pose, spec.intrinsics);
      sc.preds.push_back(std::move(fp));
    }
  }
  return sc;
}

inline std::vector<SceneRecord> generate_synthetic(const SynthSpec &spec,
                                                   const NoiseProfile &noise) {
  noise.validate();
  spec.intrinsics.validate();
  if (spec.categories.empty())
    throw Error(ErrorKind::InvariantError, "synthetic generation needs categories");
  if (spec.min_objects < 0 || spec.max_objects < spec.min_objects)
    throw Error(ErrorKind::InvariantError, "invalid objects-per-scene range");
  std::vector<SceneRecord> out;
  out.reserve(spec.scenes);
  for (std::size_t i = 0; i < spec.scenes; ++i)
    out.push_back(generate_synthetic_scene(i, spec, noise));
  return out;
}

} // namespace posekit
