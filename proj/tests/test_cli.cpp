#include <cstdlib>
#include <sstream>

#include <gtest/gtest.h>

#include "oculorl/cli.hpp"
#include "oculorl/config.hpp"
#include "test_util.hpp"

using namespace oculorl;
using oculorl::testing::scratch_dir;
using oculorl::testing::slurp;
using oculorl::testing::spit;

namespace {

struct Outcome {
  int code = 0;
  std::string out;
  std::string err;
};

Outcome invoke(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  Outcome o;
  o.code = dispatch(args, out, err);
  o.out = out.str();
  o.err = err.str();
  return o;
}

// Small networks and short episodes keep every command under a second.
std::string small_config(const std::filesystem::path& dir) {
  const auto path = dir / "small.yaml";
  spit(path,
       "episode:\n"
       "  steps: 20\n"
       "train:\n"
       "  episodes: 6\n"
       "  batch: 16\n"
       "  warmup_batches: 2\n"
       "  buffer_capacity: 2000\n"
       "  hidden: [8, 8, 8]\n"
       "  milestone_window: 3\n"
       "eval:\n"
       "  phase1_episodes: 2\n"
       "  grid_episodes: 2\n"
       "  warmup_drop: 5\n");
  return path.string();
}

}  // namespace

TEST(Cli, UnknownFlagIsUsageError) {
  const Outcome o = invoke({"train", "--no-such-flag"});
  EXPECT_EQ(o.code, 2);
  EXPECT_FALSE(o.err.empty());
}

TEST(Cli, MissingSubcommandIsUsageError) { EXPECT_EQ(invoke({}).code, 2); }

TEST(Cli, MissingConfigFileIsUsageError) {
  EXPECT_EQ(invoke({"verify", "--config", "/nonexistent/x.yaml"}).code, 2);
}

TEST(Cli, VersionFlag) {
  const Outcome o = invoke({"--version"});
  EXPECT_EQ(o.code, 0);
  EXPECT_EQ(o.out, std::string(kToolVersion) + "\n");
}

TEST(Cli, SeededTrainingIsReproducible) {
  const auto dir = scratch_dir();
  const std::string cfg = small_config(dir);
  for (const char* run : {"a", "b"}) {
    const Outcome o =
        invoke({"train", "--config", cfg, "--seed", "7", "--out", (dir / run).string()});
    ASSERT_EQ(o.code, 0) << o.err;
  }
  const std::string log = slurp(dir / "a" / "train_log.csv");
  EXPECT_EQ(std::count(log.begin(), log.end(), '\n'), 7);
  EXPECT_EQ(log, slurp(dir / "b" / "train_log.csv"));
  EXPECT_TRUE(std::filesystem::exists(dir / "a" / "checkpoints" / "final.ckpt"));

  const std::string manifest = slurp(dir / "a" / "manifest.yaml");
  EXPECT_NE(manifest.find("seed: 7"), std::string::npos);
  EXPECT_NE(manifest.find("command: train"), std::string::npos);
  const RunConfig resolved = parse_config(dir / "a" / "config.yaml");
  EXPECT_EQ(resolved.seed, 7u);
  EXPECT_EQ(resolved.episode.steps, 20);
}

TEST(Cli, EpisodesFlagOverridesConfigAndResumes) {
  const auto dir = scratch_dir();
  const std::string cfg = small_config(dir);
  const std::string out = (dir / "run").string();
  ASSERT_EQ(invoke({"train", "--config", cfg, "--episodes", "3", "--out", out}).code, 0);
  const Outcome resumed = invoke({"train", "--config", cfg, "--episodes", "5", "--out", out,
                                  "--checkpoint", out + "/checkpoints"});
  ASSERT_EQ(resumed.code, 0) << resumed.err;
  EXPECT_NE(resumed.out.find("resuming after episode 3"), std::string::npos);
  const std::string log = slurp(dir / "run" / "train_log.csv");
  EXPECT_EQ(std::count(log.begin(), log.end(), '\n'), 6);
}

TEST(Cli, EvaluationCommandsWriteReports) {
  const auto dir = scratch_dir();
  const std::string cfg = small_config(dir);
  const std::string out = (dir / "run").string();
  ASSERT_EQ(invoke({"train", "--config", cfg, "--out", out}).code, 0);

  const Outcome p1 = invoke({"eval-milestones", "--config", cfg, "--out", out});
  ASSERT_EQ(p1.code, 0) << p1.err;
  const std::string rewards = slurp(dir / "run" / "phase1_rewards.csv");
  EXPECT_EQ(rewards.substr(0, rewards.find('\n')), "milestone,episode,eval_episode,step,reward");
  EXPECT_TRUE(std::filesystem::exists(dir / "run" / "report" / "milestones.svg"));

  const Outcome p2 = invoke({"eval-grid", "--config", cfg, "--out", out, "--workers", "2"});
  ASSERT_EQ(p2.code, 0) << p2.err;
  const std::string summary = slurp(dir / "run" / "report" / "summary.yaml");
  EXPECT_NE(summary.find("overall_mean_distance_m:"), std::string::npos);
  EXPECT_NE(summary.find("random_policy_mean_distance_m:"), std::string::npos);
  EXPECT_TRUE(std::filesystem::exists(dir / "run" / "report" / "stats.csv"));

  std::filesystem::remove(dir / "run" / "report" / "milestones.svg");
  const Outcome rep = invoke({"report", "--out", out});
  ASSERT_EQ(rep.code, 0) << rep.err;
  EXPECT_TRUE(std::filesystem::exists(dir / "run" / "report" / "milestones.svg"));
}

TEST(Cli, RolloutTraceHasHeaderAndOneRowPerStep) {
  const auto dir = scratch_dir();
  const Outcome o = invoke({"rollout", "--dy", "0.1231", "--dz", "-0.1112", "--seed", "3", "--out",
                            dir.string()});
  ASSERT_EQ(o.code, 0) << o.err;
  const std::string trace = slurp(dir / "trace.csv");
  EXPECT_EQ(std::count(trace.begin(), trace.end(), '\n'), 101);
  EXPECT_NE(o.out.find("(1.0000, 0.1231, -0.1112)"), std::string::npos) << o.out;
}

TEST(Cli, VerifyPasses) {
  const auto dir = scratch_dir();
  const Outcome o = invoke({"verify", "--out", dir.string()});
  EXPECT_EQ(o.code, 0) << o.out;
  EXPECT_EQ(o.out.find("[FAIL]"), std::string::npos) << o.out;
  EXPECT_NE(o.out.find("[PASS]"), std::string::npos);
}

TEST(Cli, OutputDirectoryFromEnvironment) {
  const auto dir = scratch_dir();
  ::setenv("OCULORL_OUT", (dir / "env").c_str(), 1);
  const Outcome o = invoke({"rollout"});
  ::unsetenv("OCULORL_OUT");
  ASSERT_EQ(o.code, 0) << o.err;
  EXPECT_TRUE(std::filesystem::exists(dir / "env" / "trace.csv"));
}

TEST(Cli, MissingCheckpointIsUsageError) {
  const auto dir = scratch_dir();
  const Outcome o = invoke({"eval-grid", "--out", dir.string()});
  EXPECT_EQ(o.code, 2);
  EXPECT_NE(o.err.find("does not exist"), std::string::npos);
}

TEST(Cli, CorruptCheckpointIsRuntimeError) {
  const auto dir = scratch_dir();
  spit(dir / "bad.ckpt", std::string(40, 'x'));
  const Outcome o =
      invoke({"rollout", "--checkpoint", (dir / "bad.ckpt").string(), "--out", dir.string()});
  EXPECT_EQ(o.code, 1);
}
