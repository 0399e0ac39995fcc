#include <gtest/gtest.h>

#include "oculorl/config.hpp"
#include "oculorl/env.hpp"
#include "oculorl/error.hpp"
#include "test_util.hpp"

using namespace oculorl;

namespace {

std::string error_key(const std::string& text) {
  try {
    parse_config_text(text);
  } catch (const ValidationError& e) {
    return e.key();
  }
  return "<no error>";
}

}  // namespace

TEST(Config, EmptyTextGivesDefaults) {
  const RunConfig c = parse_config_text("");
  const RunConfig d;
  EXPECT_EQ(dump_config(c), dump_config(d));
  EXPECT_EQ(c.train.episodes, 10000);
  EXPECT_EQ(c.train.batch, 64);
  EXPECT_EQ(c.train.lr_actor, 1e-3);
  EXPECT_EQ(c.episode.steps, 100);
  EXPECT_EQ(c.episode.weights, (RewardWeights{16, 16, 32, 64, 64}));
  EXPECT_EQ(c.eval.grid_episodes, 50);
  EXPECT_EQ(c.eval.warmup_drop, 20);
}

TEST(Config, EmptyFileGivesDefaults) {
  const auto dir = oculorl::testing::scratch_dir();
  oculorl::testing::spit(dir / "empty.yaml", "");
  EXPECT_EQ(dump_config(parse_config(dir / "empty.yaml")), dump_config(RunConfig{}));
}

TEST(Config, ShippedDefaultFileMatchesCompiledDefaults) {
  const auto path = oculorl::testing::source_dir() / "config" / "default.yaml";
  ASSERT_TRUE(std::filesystem::exists(path)) << path;
  EXPECT_EQ(dump_config(parse_config(path)), dump_config(RunConfig{}));
}

TEST(Config, DumpRoundTripsExactly) {
  RunConfig c;
  c.seed = 123456789012345ULL;
  c.train.gamma = 0.1 + 0.2;
  c.model.params.k_p = 1.0 / 3.0;
  c.episode.weights = {1, 2, 3, 4, 5};
  c.train.hidden = {8, 9, 10};
  const std::string text = dump_config(c);
  const RunConfig back = parse_config_text(text);
  EXPECT_EQ(dump_config(back), text);
  EXPECT_EQ(back.train.gamma, c.train.gamma);
  EXPECT_EQ(back.model.params.k_p, c.model.params.k_p);
  EXPECT_EQ(back.seed, c.seed);
}

TEST(Config, WeightsOverrideReachesReward) {
  const RunConfig c = parse_config_text("episode:\n  weights: [1, 1, 1, 1, 1]\n");
  EyeEnv env(c.model, c.episode, 1);
  env.reset(Displacement{0, 0});
  const StepResult r = env.step(ActionVector{});
  EXPECT_NEAR(r.reward, -(0.031 * 0.031 * 2 + 0.062), 1e-12);
}

TEST(Config, PartialMuscleOverrideKeepsOtherFields) {
  const RunConfig c = parse_config_text("muscles:\n  left_SO:\n    f_max: 2.5\n");
  const RunConfig d;
  EXPECT_EQ(c.model.muscle(Eye::Left, MuscleKind::SO).f_max, 2.5);
  EXPECT_EQ(c.model.muscle(Eye::Left, MuscleKind::SO).l_opt,
            d.model.muscle(Eye::Left, MuscleKind::SO).l_opt);
  EXPECT_EQ(c.model.muscle(Eye::Right, MuscleKind::SO).f_max, 1.0);
}

TEST(Config, InsertionDirectionIsNormalized) {
  const RunConfig c = parse_config_text("muscles:\n  right_LR:\n    insertion_dir: [0, 0, 2]\n");
  EXPECT_EQ(c.model.muscle(Eye::Right, MuscleKind::LR).insertion_dir, (Vec3{0, 0, 1}));
}

TEST(Config, NegativeTauActNamesKey) {
  const std::string key = error_key("muscles:\n  right_LR:\n    tau_act: -0.01\n");
  EXPECT_NE(key.find("tau_act"), std::string::npos) << key;
  EXPECT_NE(key.find("right_LR"), std::string::npos) << key;
}

TEST(Config, UnknownKeysRejected) {
  EXPECT_EQ(error_key("bogus: 1\n"), "bogus");
  EXPECT_EQ(error_key("train:\n  learning_rate: 0.1\n"), "train.learning_rate");
  EXPECT_EQ(error_key("muscles:\n  right_XX:\n    f_max: 1\n"), "muscles.right_XX");
}

TEST(Config, WrongTypesRejected) {
  EXPECT_EQ(error_key("train:\n  episodes: many\n"), "train.episodes");
  EXPECT_EQ(error_key("episode:\n  weights: [1, 2]\n"), "episode.weights");
  EXPECT_EQ(error_key("plant:\n  eye_centers:\n    right: [0, 0]\n    left: [0, 0, 0]\n"),
            "plant.eye_centers.right");
}

TEST(Config, BadValuesRejected) {
  EXPECT_EQ(error_key("train:\n  gamma: 1.5\n"), "train.gamma");
  EXPECT_EQ(error_key("plant:\n  substeps: 0\n"), "plant.substeps");
  EXPECT_EQ(error_key("eval:\n  warmup_drop: 100\n"), "eval.warmup_drop");
  EXPECT_EQ(error_key("episode:\n  dy_range: [0.2, -0.2]\n"), "episode.dy_range");
}

TEST(Config, MalformedYamlReportsLine) {
  try {
    parse_config_text("seed: 1\ntrain:\n  episodes: [1, 2\n");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_GE(e.line(), 3u);
  }
}

TEST(Config, MissingFileIsIoFailure) {
  EXPECT_THROW(parse_config("/nonexistent/oculorl.yaml"), IoFailure);
}
