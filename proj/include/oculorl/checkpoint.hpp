#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "oculorl/trainer.hpp"

namespace oculorl {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  std::uint32_t version = kCheckpointVersion;
  /// Free-form creation info (tool version, seed).
  std::string metadata;
  TrainerState state;
  bool has_buffer = false;
};

/// Binary container: magic, version, sections of little-endian 64-bit
/// values, CRC-32 trailer. The replay buffer is written only when
/// `include_buffer` is set. Throws IoFailure.
void save_checkpoint(const TrainerState& state, const std::filesystem::path& path,
                     const std::string& metadata, bool include_buffer);

/// Throws IoFailure, CorruptChecksum, VersionMismatch, CheckpointUnreadable.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace oculorl
