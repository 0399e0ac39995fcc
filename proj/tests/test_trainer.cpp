#include <cstring>
#include <random>

#include <gtest/gtest.h>
#include <zlib.h>

#include "oculorl/checkpoint.hpp"
#include "oculorl/error.hpp"
#include "oculorl/trainer.hpp"
#include "test_util.hpp"

using namespace oculorl;
using oculorl::testing::scratch_dir;
using oculorl::testing::slurp;
using oculorl::testing::spit;

namespace {

TrainConfig small_config(int episodes) {
  TrainConfig c;
  c.episodes = episodes;
  c.hidden = {16, 16, 16};
  c.batch = 16;
  c.warmup_batches = 4;
  c.buffer_capacity = 5000;
  c.milestones.window = 5;
  return c;
}

EpisodeConfig short_episodes() {
  EpisodeConfig e;
  e.steps = 20;
  return e;
}

void run(const TrainConfig& c, TrainerState& s, const std::filesystem::path& out) {
  TrainOptions o;
  o.out_dir = out;
  o.metadata = "test";
  train(default_plant_model(), short_episodes(), c, s, o);
}

bool same_values(std::span<const double> a, std::span<const double> b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

void expect_same_state(const TrainerState& a, const TrainerState& b) {
  EXPECT_TRUE(same_values(a.agent.actor.params().values(), b.agent.actor.params().values()));
  EXPECT_TRUE(same_values(a.agent.critic.params().values(), b.agent.critic.params().values()));
  EXPECT_TRUE(
      same_values(a.agent.actor_target.params().values(), b.agent.actor_target.params().values()));
  EXPECT_TRUE(same_values(a.agent.critic_target.params().values(),
                          b.agent.critic_target.params().values()));
  EXPECT_EQ(a.agent.actor_opt.m, b.agent.actor_opt.m);
  EXPECT_EQ(a.agent.critic_opt.v, b.agent.critic_opt.v);
  EXPECT_EQ(a.agent.critic_opt.t, b.agent.critic_opt.t);
  EXPECT_EQ(a.noise.x, b.noise.x);
  EXPECT_EQ(a.noise.sigma, b.noise.sigma);
  EXPECT_TRUE(a.noise_rng == b.noise_rng);
  EXPECT_TRUE(a.env_rng == b.env_rng);
  EXPECT_EQ(a.episode, b.episode);
  EXPECT_EQ(a.log.size(), b.log.size());
  EXPECT_EQ(a.milestones.size(), b.milestones.size());
}

}  // namespace

TEST(Trainer, ZeroEpisodesWritesOnlyInitialCheckpoint) {
  const auto dir = scratch_dir();
  TrainConfig c = small_config(0);
  TrainerState s = init_trainer(c, 1);
  const std::vector<double> before(s.agent.actor.params().values().begin(),
                                   s.agent.actor.params().values().end());
  run(c, s, dir);
  EXPECT_EQ(s.episode, 0);
  EXPECT_TRUE(s.log.empty());
  EXPECT_TRUE(same_values(before, s.agent.actor.params().values()));
  EXPECT_TRUE(std::filesystem::exists(dir / "checkpoints" / "initial.ckpt"));
  EXPECT_FALSE(std::filesystem::exists(dir / "checkpoints" / "m1_5.ckpt"));
}

TEST(Trainer, SeededRunsProduceIdenticalLogs) {
  const auto dir = scratch_dir();
  const TrainConfig c = small_config(12);
  TrainerState a = init_trainer(c, 7);
  TrainerState b = init_trainer(c, 7);
  run(c, a, dir / "a");
  run(c, b, dir / "b");
  const std::string la = slurp(dir / "a" / "train_log.csv");
  EXPECT_FALSE(la.empty());
  EXPECT_EQ(la, slurp(dir / "b" / "train_log.csv"));
  expect_same_state(a, b);
}

TEST(Trainer, DifferentSeedsDiffer) {
  const TrainConfig c = small_config(3);
  TrainerState a = init_trainer(c, 1);
  TrainerState b = init_trainer(c, 2);
  run(c, a, {});
  run(c, b, {});
  EXPECT_NE(a.log[0].cumulative_reward, b.log[0].cumulative_reward);
}

TEST(Trainer, ResumeMatchesUninterruptedRun) {
  const auto dir = scratch_dir();
  const TrainConfig full = small_config(14);
  TrainerState straight = init_trainer(full, 3);
  run(full, straight, dir / "straight");

  TrainConfig half = full;
  half.episodes = 8;
  TrainerState first = init_trainer(half, 3);
  run(half, first, dir / "split");
  Checkpoint ck = load_checkpoint(dir / "split" / "checkpoints" / "final.ckpt");
  ASSERT_TRUE(ck.has_buffer);
  run(full, ck.state, dir / "split");

  expect_same_state(straight, ck.state);
  EXPECT_EQ(slurp(dir / "straight" / "train_log.csv"), slurp(dir / "split" / "train_log.csv"));
}

TEST(Trainer, LogColumnsAndMilestoneFiles) {
  const auto dir = scratch_dir();
  const TrainConfig c = small_config(10);
  TrainerState s = init_trainer(c, 5);
  run(c, s, dir);
  const std::string text = slurp(dir / "train_log.csv");
  EXPECT_EQ(text.substr(0, text.find('\n')),
            "episode,cumulative_reward,rolling_mean,milestone_flag,noise_sigma,critic_loss_mean");
  ASSERT_FALSE(s.milestones.empty());
  EXPECT_EQ(s.milestones[0].episode, 5);
  for (const MilestoneRecord& m : s.milestones) {
    EXPECT_TRUE(std::filesystem::exists(dir / "checkpoints" / m.checkpoint)) << m.checkpoint;
  }
  for (std::size_t i = 1; i < s.milestones.size(); ++i) {
    EXPECT_GT(s.milestones[i].rolling_mean, s.milestones[i - 1].rolling_mean);
  }
  // Noise decays once per episode.
  EXPECT_DOUBLE_EQ(s.log[1].noise_sigma, s.log[0].noise_sigma * c.noise_decay);
}

TEST(TrainLog, RoundTrip) {
  const auto dir = scratch_dir();
  std::vector<LogRow> rows{{1, -123.456, -123.456, 0, 0.2, 0.0},
                           {2, -0.1 / 3.0, -61.7, 1, 0.1998, 1e-300}};
  write_train_log(dir / "log.csv", rows);
  const std::vector<LogRow> back = read_train_log(dir / "log.csv");
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[1].cumulative_reward, rows[1].cumulative_reward);
  EXPECT_EQ(back[1].critic_loss_mean, rows[1].critic_loss_mean);
  EXPECT_EQ(back[1].milestone_flag, 1);
}

TEST(TrainConfig, Validation) {
  TrainConfig c;
  c.gamma = 1.0;
  EXPECT_THROW(c.validate(), ValidationError);
  c = TrainConfig{};
  c.batch = 0;
  EXPECT_THROW(c.validate(), ValidationError);
  EXPECT_NO_THROW(TrainConfig{}.validate());
}

TEST(Checkpoint, RoundTripIsBitExact) {
  const auto dir = scratch_dir();
  const TrainConfig c = small_config(6);
  TrainerState s = init_trainer(c, 11);
  run(c, s, {});
  save_checkpoint(s, dir / "x.ckpt", "meta text", true);
  const Checkpoint ck = load_checkpoint(dir / "x.ckpt");
  EXPECT_EQ(ck.version, kCheckpointVersion);
  EXPECT_EQ(ck.metadata, "meta text");
  EXPECT_TRUE(ck.has_buffer);
  expect_same_state(s, ck.state);
  ASSERT_EQ(ck.state.buffer.size(), s.buffer.size());
  EXPECT_EQ(ck.state.buffer.cursor(), s.buffer.cursor());
  EXPECT_TRUE(ck.state.buffer.rng() == s.buffer.rng());
  for (std::size_t i = 0; i < s.buffer.size(); ++i) {
    EXPECT_EQ(ck.state.buffer.slots()[i].s, s.buffer.slots()[i].s);
    EXPECT_EQ(ck.state.buffer.slots()[i].r, s.buffer.slots()[i].r);
  }
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int i = 0; i < 100; ++i) {
    Observation o;
    for (double& v : o) v = n(rng);
    EXPECT_EQ(s.agent.actor.act(o), ck.state.agent.actor.act(o));
  }
  // Saving the loaded state reproduces the file byte for byte.
  save_checkpoint(ck.state, dir / "y.ckpt", "meta text", true);
  EXPECT_EQ(slurp(dir / "x.ckpt"), slurp(dir / "y.ckpt"));
}

TEST(Checkpoint, WithoutBuffer) {
  const auto dir = scratch_dir();
  const TrainerState s = init_trainer(small_config(1), 2);
  save_checkpoint(s, dir / "x.ckpt", "", false);
  const Checkpoint ck = load_checkpoint(dir / "x.ckpt");
  EXPECT_FALSE(ck.has_buffer);
  EXPECT_EQ(ck.state.buffer.size(), 0u);
  EXPECT_EQ(ck.state.buffer.capacity(), s.buffer.capacity());
}

TEST(Checkpoint, TruncatedFileFailsChecksum) {
  const auto dir = scratch_dir();
  save_checkpoint(init_trainer(small_config(1), 2), dir / "x.ckpt", "", false);
  const std::string bytes = slurp(dir / "x.ckpt");
  for (std::size_t keep : {bytes.size() - 1, bytes.size() / 2, std::size_t{20}, std::size_t{5}}) {
    spit(dir / "t.ckpt", bytes.substr(0, keep));
    EXPECT_THROW(load_checkpoint(dir / "t.ckpt"), CorruptChecksum) << keep;
  }
}

TEST(Checkpoint, FlippedByteFailsChecksum) {
  const auto dir = scratch_dir();
  save_checkpoint(init_trainer(small_config(1), 2), dir / "x.ckpt", "", false);
  std::string bytes = slurp(dir / "x.ckpt");
  bytes[bytes.size() / 2] ^= 0x10;
  spit(dir / "x.ckpt", bytes);
  EXPECT_THROW(load_checkpoint(dir / "x.ckpt"), CorruptChecksum);
}

TEST(Checkpoint, VersionMismatchRejected) {
  const auto dir = scratch_dir();
  save_checkpoint(init_trainer(small_config(1), 2), dir / "x.ckpt", "", false);
  std::string bytes = slurp(dir / "x.ckpt");
  bytes[8] = 2;  // little-endian version right after the magic
  const std::size_t body = bytes.size() - 4;
  const auto crc = static_cast<std::uint32_t>(
      crc32(crc32(0L, Z_NULL, 0), reinterpret_cast<const Bytef*>(bytes.data()),
            static_cast<uInt>(body)));
  for (int i = 0; i < 4; ++i) bytes[body + static_cast<std::size_t>(i)] = static_cast<char>((crc >> (8 * i)) & 0xff);
  spit(dir / "x.ckpt", bytes);
  EXPECT_THROW(load_checkpoint(dir / "x.ckpt"), VersionMismatch);
}

TEST(Checkpoint, ForeignFileUnreadable) {
  const auto dir = scratch_dir();
  spit(dir / "x.ckpt", std::string(64, 'z'));
  EXPECT_THROW(load_checkpoint(dir / "x.ckpt"), CheckpointUnreadable);
  EXPECT_THROW(load_checkpoint(dir / "missing.ckpt"), IoFailure);
}
