#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "oculorl/env.hpp"
#include "oculorl/netcore.hpp"

namespace oculorl {

struct Transition {
  Observation s{};
  ActionVector a{};
  double r = 0.0;
  Observation s_next{};
  bool done = false;
};

/// Fixed-capacity ring of transitions with its own sampling stream.
class ReplayBuffer {
 public:
  ReplayBuffer(std::size_t capacity, std::uint64_t seed);

  /// Evicts the oldest transition once full.
  void push(const Transition& t);
  /// Uniform with replacement. Throws BufferTooSmall when size() < batch.
  std::vector<Transition> sample(std::size_t batch);

  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  /// Stored transitions, oldest first.
  std::vector<Transition> ordered() const;
  /// Storage in slot order plus the overwrite cursor, for exact persistence.
  const std::vector<Transition>& slots() const { return items_; }
  std::size_t cursor() const { return cursor_; }
  /// Inverse of slots()/cursor(). Throws ValidationError on inconsistent input.
  void restore(std::vector<Transition> slots, std::size_t cursor);

  std::mt19937_64& rng() { return rng_; }
  const std::mt19937_64& rng() const { return rng_; }

 private:
  std::size_t capacity_;
  std::size_t cursor_ = 0;  // next slot to overwrite once full
  std::vector<Transition> items_;
  std::mt19937_64 rng_;
};

/// Ornstein-Uhlenbeck process, one independent channel per action slot.
struct OuNoise {
  ActionVector x{};
  double theta = 0.15;
  double sigma = 0.2;
  double mu = 0.0;
  double dt = 0.01;
};

/// x' = x + theta (mu - x) dt + sigma sqrt(dt) N(0, 1), per channel; returns x'.
ActionVector noise_sample(OuNoise& noise, std::mt19937_64& rng);
void noise_reset(OuNoise& noise);

/// Main and target networks with one optimizer per main network.
struct Agent {
  Actor actor;
  Critic critic;
  Actor actor_target;
  Critic critic_target;
  AdamState actor_opt;
  AdamState critic_opt;
};

/// Fresh networks from `rng`; targets start as exact copies.
Agent make_agent(const std::vector<int>& hidden, double lr_actor, double lr_critic,
                 std::mt19937_64& rng);

/// One Adam step on the critic towards y = r + gamma (1 - done) Q'(s', mu'(s')).
/// Returns the pre-step mean squared error. Throws Diverged on a non-finite loss.
double critic_update(Agent& agent, std::span<const Transition> batch, double gamma);

/// Per-sample Q values (1 x B) and dQ_i/da_i (12 x B) for a batch of actions.
using QGradient = std::function<std::pair<Matrix, Matrix>(const Matrix& states,
                                                          const Matrix& actions)>;

/// One Adam step ascending the mean of `q` over the batch states through the
/// actor. Returns the pre-step mean Q. Throws Diverged.
double actor_update(Actor& actor, AdamState& opt, const Matrix& states, const QGradient& q);

/// actor_update against the agent's own critic.
double actor_update(Agent& agent, std::span<const Transition> batch);

/// target = tau * source + (1 - tau) * target. Throws ShapeMismatch.
void soft_update(NetParams& target, const NetParams& source, double tau);

struct MilestoneRule {
  int window = 100;
  double relative_margin = 0.01;
  double min_margin = 0.5;

  double margin(double best) const;
};

struct MilestoneRecord {
  int index = 0;
  int episode = 0;  ///< 1-based count of completed episodes
  double rolling_mean = 0.0;
  std::string checkpoint;
};

/// Mean of the last min(window, size) entries; 0 for an empty history.
double rolling_mean(std::span<const double> history, int window);

/// True when the history spans at least one window and the rolling mean over
/// the last window beats `best` by the rule's margin. With no previous
/// milestone the first full window always qualifies.
bool milestone_check(std::span<const double> history, const MilestoneRule& rule,
                     std::optional<double> best);

/// Counter-based stream derivation: distinct, well-mixed seeds per purpose.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

namespace seed_stream {
inline constexpr std::uint64_t kNetworks = 1;
inline constexpr std::uint64_t kEnv = 2;
inline constexpr std::uint64_t kReplay = 3;
inline constexpr std::uint64_t kNoise = 4;
inline constexpr std::uint64_t kEval = 5;
inline constexpr std::uint64_t kWorkers = 100;
}  // namespace seed_stream

}  // namespace oculorl
