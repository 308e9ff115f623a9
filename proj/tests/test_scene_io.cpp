// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <optional>
#include <random>

#include "oracles.hpp"
#include "posekit/config.hpp"
#include "posekit/scene_io.hpp"

using namespace posekit;

namespace {

const std::string kRecord =
    R"({"scene_id":"s1","intrinsics":{"fx":500,"fy":500,"cx":320,"cy":240,"width":640,"height":480},)"
    R"("gts":[{"category":"mug","pose":{"rotation":[1,0,0,0,1,0,0,0,1],"translation":[0,0,2],"scale":[0.1,0.2,0.1]}}],)"
    R"("preds":[{"category":"mug","confidence":0.8,"pose":{"rotation":[1,0,0,0,1,0,0,0,1],"translation":[0.01,0,2],"scale":[0.1,0.2,0.1]},"scores":[0.1,0.8]}]})";

std::optional<Error> parse_error(const std::string &text) {
  try {
    parse_scenes(text);
  } catch (const Error &e) {
    return e;
  }
  return std::nullopt;
}

std::string with(const std::string &from, const std::string &to) {
  std::string s = kRecord;
  const auto at = s.find(from);
  EXPECT_NE(at, std::string::npos) << from;
  return s.replace(at, from.size(), to);
}

std::vector<SceneRecord> synth(std::size_t n, const std::string &profile,
                               std::uint64_t seed = 3) {
  const RunConfig c = default_config();
  NoiseProfile p = c.noise_profile(profile);
  p.seed = seed;
  return generate_synthetic(synth_spec(c, n), p);
}

} // namespace

TEST(Parse, MinimalRecord) {
  const auto scenes = parse_scenes(kRecord);
  ASSERT_EQ(scenes.size(), 1u);
  const auto &s = scenes[0];
  EXPECT_EQ(s.scene_id, "s1");
  EXPECT_EQ(s.intrinsics.fx, 500.0);
  ASSERT_EQ(s.gts.size(), 1u);
  EXPECT_FALSE(s.gts[0].box.has_value());
  EXPECT_EQ(s.gts[0].pose.scale, Vec3(0.1, 0.2, 0.1));
  ASSERT_EQ(s.preds.size(), 1u);
  EXPECT_EQ(s.preds[0].confidence, 0.8);
  EXPECT_EQ(*s.preds[0].scores, (std::vector<double>{0.1, 0.8}));
}

TEST(Parse, BlankLinesSkippedAndLinesCounted) {
  const std::string two = kRecord + "\n\n   \n" + with("\"s1\"", "\"s2\"") + "\n";
  EXPECT_EQ(parse_scenes(two).size(), 2u);
  EXPECT_TRUE(parse_scenes("").empty());
  EXPECT_TRUE(parse_scenes("\n\n").empty());
}

TEST(Parse, MalformedLineReportsLineNumber) {
  std::string text;
  for (int i = 1; i <= 6; ++i)
    text += with("\"s1\"", "\"s" + std::to_string(i) + "\"") + "\n";
  text += "{\"scene_id\": \"broken\",\n";
  const auto e = parse_error(text);
  ASSERT_TRUE(e);
  EXPECT_EQ(e->kind(), ErrorKind::SchemaError);
  EXPECT_EQ(e->line(), 7u);
  EXPECT_NE(std::string(e->what()).find("line 7"), std::string::npos);
}

TEST(Parse, SchemaErrorsNameTheField) {
  struct Case {
    std::string text;
    ErrorKind kind;
    std::string field;
  };
  const std::vector<Case> cases{
      {with(R"("scene_id":"s1",)", ""), ErrorKind::SchemaError, "scene_id"},
      {with(R"("fx":500)", R"("fx":"500")"), ErrorKind::SchemaError, "intrinsics.fx"},
      {with(R"("fx":500)", R"("fx":-1)"), ErrorKind::InvariantError, "intrinsics.fx"},
      {with(R"("translation":[0,0,2])", R"("translation":[0,2])"),
       ErrorKind::SchemaError, "gts[0].pose.translation"},
      {with(R"("rotation":[1,0,0,0,1,0,0,0,1],"translation":[0,0,2])",
            R"("rotation":[1,0,0,0,1,0,0,0,-1],"translation":[0,0,2])"),
       ErrorKind::InvariantError, "gts[0].pose.rotation"},
      {with(R"("scale":[0.1,0.2,0.1]}}])", R"("scale":[0.1,0,0.1]}}])"),
       ErrorKind::InvariantError, "gts[0].pose.scale[1]"},
      {with(R"("confidence":0.8)", R"("confidence":1.5)"), ErrorKind::InvariantError,
       "preds[0].confidence"},
      {with(R"("scores":[0.1,0.8])", R"("scores":[0.1,-0.8])"),
       ErrorKind::InvariantError, "preds[0].scores"},
      {with(R"("width":640)", R"("width":640,"skew":0)"), ErrorKind::SchemaError,
       "intrinsics.skew"},
      {with(R"("gts":[)", R"("gts":{"a":1},"x":[)"), ErrorKind::SchemaError, "gts"},
      {with(R"({"scene_id")", R"({"schema_version":"9","scene_id")"),
       ErrorKind::SchemaError, "schema_version"},
      {"[1,2,3]", ErrorKind::SchemaError, ""},
  };
  for (const auto &c : cases) {
    const auto e = parse_error(c.text);
    ASSERT_TRUE(e) << c.text;
    EXPECT_EQ(e->kind(), c.kind) << c.text;
    EXPECT_EQ(e->field(), c.field) << e->what();
    EXPECT_EQ(e->line(), 1u);
  }
}

TEST(Parse, DuplicateSceneIds) {
  const auto e = parse_error(kRecord + "\n" + kRecord);
  ASSERT_TRUE(e);
  EXPECT_EQ(e->kind(), ErrorKind::InvariantError);
  EXPECT_EQ(e->line(), 2u);
}

TEST(Parse, NearlyOrthonormalRotationAccepted) {
  const auto s = parse_scenes(
      with("[1,0,0,0,1,0,0,0,1]", "[1,0,0,0,1.0000000001,0,0,0,1]"));
  EXPECT_EQ(s.size(), 1u);
}

TEST(Serialize, UnknownTopLevelAndInstanceKeysSurvive) {
  const auto text = with(R"("category":"mug","pose")", R"("category":"mug","note":"x","pose")");
  const auto s = parse_scenes(with(R"({"scene_id")", R"({"split":"val","scene_id")"));
  EXPECT_EQ(s[0].extra["split"], "val");
  const auto t = parse_scenes(text);
  EXPECT_EQ(t[0].gts[0].extra["note"], "x");
  EXPECT_EQ(parse_scenes(serialize_scenes(t)), t);
  EXPECT_EQ(parse_scenes(serialize_scenes(s)), s);
}

TEST(Serialize, RoundTripIsIdentity) {
  for (const char *profile : {"perfect", "realistic"}) {
    const auto scenes = synth(100, profile);
    const std::string text = serialize_scenes(scenes);
    const auto back = parse_scenes(text);
    EXPECT_EQ(back, scenes);
    EXPECT_EQ(serialize_scenes(back), text);
  }
}

TEST(Serialize, EmptyListIsEmptyText) {
  EXPECT_EQ(serialize_scenes({}), "");
}

TEST(DeriveBoxes, FillsMissingKeepsExisting) {
  auto s = parse_scenes(kRecord);
  s[0].preds[0].box = BBox2D{0.1, 0.1, 0.05, 0.05};
  const auto d = derive_boxes(s);
  EXPECT_TRUE(d.failures.empty());
  ASSERT_TRUE(d.scenes[0].gts[0].box);
  EXPECT_EQ(*d.scenes[0].gts[0].box,
            project_cuboid_to_bbox(s[0].gts[0].pose, s[0].intrinsics));
  EXPECT_EQ(*d.scenes[0].preds[0].box, (BBox2D{0.1, 0.1, 0.05, 0.05}));
  const auto o = derive_boxes(s, true);
  EXPECT_NE(*o.scenes[0].preds[0].box, (BBox2D{0.1, 0.1, 0.05, 0.05}));
}

TEST(DeriveBoxes, ReportsBehindCamera) {
  auto s = parse_scenes(with("[0,0,2]", "[0,0,-2]"));
  const auto d = derive_boxes(s);
  ASSERT_EQ(d.failures.size(), 1u);
  EXPECT_EQ(d.failures[0].scene_id, "s1");
  EXPECT_FALSE(d.failures[0].is_prediction);
  EXPECT_FALSE(d.scenes[0].gts[0].box);
}

TEST(Synth, DeterministicAndSeedSensitive) {
  EXPECT_EQ(serialize_scenes(synth(30, "realistic", 9)),
            serialize_scenes(synth(30, "realistic", 9)));
  EXPECT_NE(serialize_scenes(synth(30, "realistic", 9)),
            serialize_scenes(synth(30, "realistic", 10)));
  // A scene depends only on its own index.
  EXPECT_EQ(synth(10, "realistic")[4], synth(5, "realistic")[4]);
}

TEST(Synth, PerfectProfileCopiesGroundTruth) {
  for (const auto &s : synth(50, "perfect")) {
    ASSERT_EQ(s.preds.size(), s.gts.size());
    EXPECT_GE(s.gts.size(), 1u);
    EXPECT_LE(s.gts.size(), 10u);
    for (std::size_t i = 0; i < s.gts.size(); ++i) {
      EXPECT_EQ(s.preds[i].pose, s.gts[i].pose);
      EXPECT_EQ(s.preds[i].category, s.gts[i].category);
      EXPECT_EQ(s.preds[i].confidence, 1.0);
      EXPECT_GT(s.gts[i].pose.translation.z(), 0.0);
    }
  }
}

TEST(Synth, RandomRotationsAreUniform) {
  // For a uniform distribution on SO(3) every entry of R has mean zero.
  std::mt19937_64 rng(1);
  Mat3 sum = Mat3::Zero();
  const int n = 20000;
  for (int i = 0; i < n; ++i)
    sum += random_rotation(rng).matrix();
  EXPECT_LT((sum / n).cwiseAbs().maxCoeff(), 0.05);
}

TEST(Synth, RotationNoiseHasRequestedSpread) {
  // |N(0, sigma)| has mean sigma * sqrt(2 / pi).
  for (double sigma : {5.0, 10.0}) {
    const RunConfig c = default_config();
    NoiseProfile p;
    p.rotation_deg = sigma;
    p.seed = 21;
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto &s : generate_synthetic(synth_spec(c, 300), p))
      for (std::size_t i = 0; i < s.gts.size(); ++i) {
        sum += rad_to_deg(geodesic_distance(s.preds[i].pose.rotation,
                                            s.gts[i].pose.rotation));
        ++n;
      }
    const double expect = sigma * std::sqrt(2.0 / kPi);
    EXPECT_NEAR(sum / n, expect, 0.1 * expect) << sigma;
  }
}

TEST(Synth, DropAndFalsePositiveRates) {
  const RunConfig c = default_config();
  NoiseProfile p;
  p.drop_rate = 1.0;
  for (const auto &s : generate_synthetic(synth_spec(c, 20), p))
    EXPECT_TRUE(s.preds.empty());
  p.drop_rate = 0.0;
  p.false_positive_rate = 1.0;
  for (const auto &s : generate_synthetic(synth_spec(c, 20), p)) {
    EXPECT_EQ(s.preds.size(), 2 * s.gts.size());
    for (const auto &q : s.preds)
      EXPECT_LE(q.confidence, 1.0);
  }
  p.drop_rate = 1.5;
  EXPECT_THROW(generate_synthetic(synth_spec(c, 1), p), Error);
}
