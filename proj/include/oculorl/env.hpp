#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <vector>

#include "oculorl/plant.hpp"
#include "oculorl/vecmath.hpp"

namespace oculorl {

inline constexpr int kObservationSize = 27;
inline constexpr int kActionSize = kMuscleCount;

/// target(3), pog_right(3), pog_left(3), fick_right(3), fick_left(3),
/// activations(12).
using Observation = std::array<double, kObservationSize>;
/// Excitations in [0, 1], same slot order as the activations.
using ActionVector = std::array<double, kActionSize>;

namespace obs_layout {
inline constexpr int kTarget = 0;
inline constexpr int kPogRight = 3;
inline constexpr int kPogLeft = 6;
inline constexpr int kFickRight = 9;
inline constexpr int kFickLeft = 12;
inline constexpr int kActivations = 15;
}  // namespace obs_layout

using RewardWeights = std::array<double, 5>;

struct RewardTerms {
  double dist_ro = 0.0;  ///< |pog_right - target|, m
  double dist_lo = 0.0;  ///< |pog_left - target|, m
  double dist_lr = 0.0;  ///< |pog_right - pog_left|, m
  double lr_y = 0.0;     ///< pog_right.y - pog_left.y, m
  int lr_z = 0;          ///< 1 when the eyes are crossed
  double r = 0.0;
};

struct Displacement {
  double dy = 0.0;
  double dz = 0.0;
};

struct EpisodeConfig {
  Vec3 target_base{1.0, 0.0, 0.0};
  std::array<double, 2> dy_range{-0.16, 0.16};
  std::array<double, 2> dz_range{-0.32, 0.32};
  int steps = 100;
  double dt = 0.01;
  RewardWeights weights{16.0, 16.0, 32.0, 64.0, 64.0};
  /// Reward for a step that ends in divergence or a gaze that misses the
  /// target plane.
  double failure_reward = -200.0;
  /// Standard deviation (rad) of a random initial rotation applied to each
  /// eye at reset; zero keeps the exact primary position.
  double initial_jitter = 0.0;

  void validate() const;
};

/// Where the eye's optical axis meets the plane x = target_x.
/// Throws GazeParallel when the gaze does not point toward the plane.
Vec3 compute_pog(const EyeState& eye, const Vec3& eye_center, double target_x);

/// 1 iff the right POG lies strictly left of (smaller z than) the left POG.
int detect_crossed(const Vec3& pog_right, const Vec3& pog_left);

/// -w1 d_RO^2 - w2 d_LO^2 - w3 d_LR - w4 lr_y^2 - w5 lr_z
double compute_reward(const RewardTerms& terms, const RewardWeights& w);

/// Distances and crossing flag for a pair of POGs; `r` is filled in too.
RewardTerms measure_terms(const Vec3& pog_right, const Vec3& pog_left, const Vec3& target,
                          const RewardWeights& w);

/// Throws GazeParallel if either gaze misses the plane.
Observation build_observation(const PlantState& plant, const PlantModel& model,
                              const Vec3& target);

enum class StepStatus { Running, TimeLimit, Diverged, GazeParallel };

struct StepResult {
  Observation observation{};
  double reward = 0.0;
  bool done = false;
  RewardTerms terms;
  StepStatus status = StepStatus::Running;
};

/// Episodic fixation task: a target appears at target_base + (0, dy, dz) and
/// the agent drives 12 excitations for `steps` steps of `dt`.
class EyeEnv {
 public:
  EyeEnv(PlantModel model, EpisodeConfig config, std::uint64_t seed);

  Observation reset(std::optional<Displacement> override_displacement = std::nullopt);
  /// Throws EpisodeFinished when called after `done`.
  StepResult step(const ActionVector& action);

  const PlantState& plant() const { return plant_; }
  const PlantModel& model() const { return model_; }
  const EpisodeConfig& config() const { return config_; }
  const Vec3& target() const { return target_; }
  const Observation& observation() const { return observation_; }
  int steps_taken() const { return step_; }
  bool done() const { return done_; }

  std::mt19937_64& rng() { return rng_; }
  const std::mt19937_64& rng() const { return rng_; }

 private:
  PlantModel model_;
  EpisodeConfig config_;
  std::mt19937_64 rng_;
  PlantState plant_;
  Vec3 target_;
  Observation observation_{};
  int step_ = 0;
  bool done_ = true;
};

/// One row of an episode trace export.
struct TraceRow {
  int step = 0;
  Observation observation{};
  RewardTerms terms;
  double reward = 0.0;
};

/// CSV with columns step, target_{x,y,z}, pog_r_{x,y,z}, pog_l_{x,y,z},
/// fick_r_{yaw,pitch,torsion}, fick_l_{...}, act_0..act_11, dist_RO, dist_LO,
/// dist_LR, lr_y, lr_z, reward. Throws IoFailure.
void write_trace_csv(const std::filesystem::path& path, const std::vector<TraceRow>& rows);

}  // namespace oculorl
