#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "oculorl/env.hpp"
#include "oculorl/plant.hpp"
#include "oculorl/trainer.hpp"

namespace oculorl {

struct EvalConfig {
  int phase1_episodes = 10;
  int grid_episodes = 50;      ///< per grid point
  double grid_spacing = 0.1;   ///< m; the grid is {-s, 0, s}^2
  int warmup_drop = 20;        ///< leading steps excluded from statistics
  double grid_jitter = 0.0087266462599716477;  ///< rad (0.5 deg) initial-orientation spread

  void validate() const;
};

struct RunConfig {
  std::uint64_t seed = 0;
  std::string output_dir = "runs";
  PlantModel model = default_plant_model();
  EpisodeConfig episode;
  TrainConfig train;
  EvalConfig eval;

  void validate() const;
};

/// Throws ParseError (with 1-based line) on malformed YAML and
/// ValidationError naming the key for unknown keys, wrong types or bad values.
RunConfig parse_config_text(const std::string& text);
/// Also throws IoFailure.
RunConfig parse_config(const std::filesystem::path& path);

/// Fully resolved YAML; parse_config_text(dump_config(c)) reproduces c exactly.
std::string dump_config(const RunConfig& config);

}  // namespace oculorl
