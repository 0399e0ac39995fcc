#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "oculorl/env.hpp"
#include "oculorl/netcore.hpp"
#include "oculorl/plant.hpp"

namespace oculorl {

/// Maps an observation to excitations. The generator is the caller's
/// per-point stream; deterministic policies ignore it.
using Policy = std::function<ActionVector(const Observation&, std::mt19937_64&)>;

Policy greedy_policy(const Actor& actor);
/// Independent uniform excitations in [0, 1].
Policy random_policy();

struct GridSpec {
  std::vector<Displacement> points;
  int episodes_per_point = 50;
  int steps = 100;
  int warmup_drop = 20;

  /// The 3 x 3 grid {-spacing, 0, spacing}^2, dy major.
  static GridSpec standard(double spacing = 0.1, int episodes = 50, int steps = 100,
                           int warmup_drop = 20);
  void validate() const;
};

struct EpisodeTrace {
  std::vector<double> dist_r;  ///< per step, m
  std::vector<double> dist_l;
  std::vector<double> reward;
  std::vector<ActionVector> activation;  ///< per step, right LR..IO then left
};

struct PointResult {
  Displacement displacement;
  std::vector<EpisodeTrace> episodes;
};

struct EyeStats {
  double mean = 0.0;
  double max = 0.0;
  double min = 0.0;
  double std = 0.0;  ///< population
};

/// Distances in cm.
struct StatsRow {
  double dy = 0.0;
  double dz = 0.0;
  EyeStats right;
  EyeStats left;
};

struct FixationStats {
  std::vector<StatsRow> points;
  StatsRow overall;  ///< pools every post-drop sample of every point
};

/// Statistics of per-step POG-target distances after dropping the first
/// `warmup_drop` steps of every episode. Throws EmptyAfterDrop when a point
/// keeps no samples.
FixationStats aggregate_stats(std::span<const PointResult> points, int warmup_drop);

/// atan(distance / depth) in degrees.
double deviation_angle(double distance_m, double depth_m = 1.0);

struct Phase2Result {
  std::vector<PointResult> points;
  FixationStats stats;
};

/// Runs every grid point with its own stream derived from (seed, point
/// index), so results do not depend on `workers`. `base` supplies the plant
/// step, reward and jitter; steps come from the grid.
Phase2Result run_phase2(const Policy& policy, const PlantModel& model, const EpisodeConfig& base,
                        const GridSpec& grid, std::uint64_t seed, int workers = 1);

/// Mean of the overall right and left mean distances, in m.
double overall_mean_distance(const FixationStats& stats);

struct MilestonePolicy {
  int index = 0;
  int episode = 0;
  double train_mean = 0.0;  ///< rolling mean recorded during training
  Actor actor;
};

struct Phase1Curve {
  int index = 0;
  int episode = 0;
  double train_mean = 0.0;
  std::vector<std::vector<double>> rewards;  ///< episode x step
  std::vector<double> cumulative;            ///< per episode
  double mean_cumulative = 0.0;
  double std_cumulative = 0.0;
};

/// Greedy rollouts of every policy on the same `episodes` targets, drawn
/// from `seed`. Throws CheckpointUnreadable when `policies` is empty.
std::vector<Phase1Curve> run_phase1(std::span<const MilestonePolicy> policies,
                                    const PlantModel& model, const EpisodeConfig& config,
                                    int episodes, std::uint64_t seed);

/// Pointwise mean and std over episodes at every step index.
struct PointSeries {
  Displacement displacement;
  std::vector<double> r_mean, r_std, l_mean, l_std;  ///< m
  std::vector<ActionVector> act_mean, act_std;
};

PointSeries summarize_point(const PointResult& point);

struct MilestoneSummary {
  int index = 0;
  int episode = 0;
  double train_mean = 0.0;
  double eval_mean = 0.0;
  double eval_std = 0.0;
};

std::vector<MilestoneSummary> summarize_phase1(std::span<const Phase1Curve> curves);

/// Writes under out_dir/report: stats.csv and overall.csv, then for every
/// series point_<dy>_<dz>/{distances,activations}.{csv,svg}, then
/// milestones.{csv,svg} when milestones are given. Throws IoFailure.
void emit_report(const std::filesystem::path& out_dir, const FixationStats& stats,
                 std::span<const PointSeries> series, std::span<const MilestoneSummary> milestones);

/// Same as emit_report, but without the statistics tables; used when only
/// phase-1 output exists.
void emit_milestone_report(const std::filesystem::path& out_dir,
                           std::span<const MilestoneSummary> milestones);

/// Rebuilds the SVG plots of an existing report directory from its CSVs.
/// Returns the number of plots written. Throws IoFailure.
int regenerate_plots(const std::filesystem::path& report_dir);

/// "point_<dy>_<dz>" with two decimals.
std::string point_dir_name(const Displacement& d);

inline constexpr const char* kStatsHeader = "dy,dz,r_mean,l_mean,r_max,l_max,r_min,l_min,r_std,l_std";

}  // namespace oculorl
