#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "oculorl/ddpg.hpp"
#include "oculorl/env.hpp"
#include "oculorl/plant.hpp"

namespace oculorl {

struct TrainConfig {
  int episodes = 10000;
  int batch = 64;
  double lr_actor = 1e-3;
  double lr_critic = 1e-3;
  double gamma = 0.96;
  double tau = 0.001;
  double noise_theta = 0.15;
  double noise_sigma = 0.2;
  double noise_dt = 0.01;
  double noise_decay = 0.999;  ///< sigma multiplier applied after every episode
  std::size_t buffer_capacity = 1000000;
  int warmup_batches = 10;  ///< updates start once the buffer holds this many batches
  std::vector<int> hidden{64, 64, 64};
  MilestoneRule milestones;

  void validate() const;
};

struct LogRow {
  int episode = 0;  ///< 1-based
  double cumulative_reward = 0.0;
  double rolling_mean = 0.0;
  int milestone_flag = 0;
  double noise_sigma = 0.0;  ///< sigma used during the episode
  double critic_loss_mean = 0.0;  ///< 0 when no update ran
};

/// Everything needed to continue a run bit-exactly.
struct TrainerState {
  Agent agent;
  ReplayBuffer buffer;
  OuNoise noise;
  std::mt19937_64 noise_rng;
  std::mt19937_64 env_rng;
  int episode = 0;  ///< completed episodes
  std::vector<LogRow> log;
  std::vector<MilestoneRecord> milestones;
};

/// Networks, buffer and streams derived from `seed`.
TrainerState init_trainer(const TrainConfig& config, std::uint64_t seed);

struct TrainOptions {
  /// Receives train_log.csv and checkpoints/. Empty disables all file output.
  std::filesystem::path out_dir;
  /// 1 runs the exact sequential loop. More collect episodes in parallel
  /// with per-round actor snapshots; such runs are not reproducible.
  int workers = 1;
  /// Called after every episode.
  std::function<void(const LogRow&)> on_episode;
  /// Stored in every checkpoint header.
  std::string metadata;
};

/// Runs episodes until `config.episodes` have completed in total, starting
/// from `state` (fresh or resumed). Writes initial.ckpt for a fresh run,
/// m<index>_<episode>.ckpt per milestone and final.ckpt with the replay
/// buffer. A non-finite update writes diverged.ckpt and rethrows Diverged.
void train(const PlantModel& model, const EpisodeConfig& episode, const TrainConfig& config,
           TrainerState& state, const TrainOptions& options);

/// Header and one line per row, fixed formatting.
void write_train_log(const std::filesystem::path& path, const std::vector<LogRow>& rows);
std::vector<LogRow> read_train_log(const std::filesystem::path& path);

}  // namespace oculorl
