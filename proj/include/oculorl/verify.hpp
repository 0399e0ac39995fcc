#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "oculorl/config.hpp"

namespace oculorl {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Fast self-checks of the configured stack: dimensions, reward arithmetic,
/// activation dynamics, muscle action signs, plant settling and network
/// gradients. Each check reports instead of throwing.
std::vector<CheckResult> run_verification(const RunConfig& config);

}  // namespace oculorl
