#include "oculorl/ddpg.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "oculorl/error.hpp"

namespace oculorl {

namespace {

struct BatchMatrices {
  Matrix s;
  Matrix a;
  Matrix r;
  Matrix s_next;
  Matrix not_done;
};

BatchMatrices to_matrices(std::span<const Transition> batch) {
  const auto n = static_cast<Eigen::Index>(batch.size());
  BatchMatrices m{Matrix(kObservationSize, n), Matrix(kActionSize, n), Matrix(1, n),
                  Matrix(kObservationSize, n), Matrix(1, n)};
  for (Eigen::Index c = 0; c < n; ++c) {
    const Transition& t = batch[static_cast<std::size_t>(c)];
    for (int i = 0; i < kObservationSize; ++i) {
      m.s(i, c) = t.s[static_cast<std::size_t>(i)];
      m.s_next(i, c) = t.s_next[static_cast<std::size_t>(i)];
    }
    for (int i = 0; i < kActionSize; ++i) m.a(i, c) = t.a[static_cast<std::size_t>(i)];
    m.r(0, c) = t.r;
    m.not_done(0, c) = t.done ? 0.0 : 1.0;
  }
  return m;
}

}  // namespace

// -- Replay -------------------------------------------------------------------

ReplayBuffer::ReplayBuffer(std::size_t capacity, std::uint64_t seed)
    : capacity_(capacity), rng_(seed) {
  if (capacity == 0) throw ValidationError("buffer_capacity", "must be > 0");
}

void ReplayBuffer::push(const Transition& t) {
  if (items_.size() < capacity_) {
    items_.push_back(t);
    return;
  }
  items_[cursor_] = t;
  cursor_ = (cursor_ + 1) % capacity_;
}

std::vector<Transition> ReplayBuffer::sample(std::size_t batch) {
  if (batch == 0 || items_.size() < batch) {
    throw BufferTooSmall(
        fmt::format("need {} transitions to sample, have {}", batch, items_.size()));
  }
  std::uniform_int_distribution<std::size_t> pick(0, items_.size() - 1);
  std::vector<Transition> out;
  out.reserve(batch);
  for (std::size_t i = 0; i < batch; ++i) out.push_back(items_[pick(rng_)]);
  return out;
}

std::vector<Transition> ReplayBuffer::ordered() const {
  std::vector<Transition> out;
  out.reserve(items_.size());
  for (std::size_t i = 0; i < items_.size(); ++i) {
    out.push_back(items_[(cursor_ + i) % items_.size()]);
  }
  return out;
}

void ReplayBuffer::restore(std::vector<Transition> slots, std::size_t cursor) {
  if (slots.size() > capacity_) {
    throw ValidationError("buffer_capacity", "restored buffer exceeds capacity");
  }
  if (cursor != 0 && cursor >= slots.size()) {
    throw ValidationError("buffer_cursor", "cursor outside the stored range");
  }
  items_ = std::move(slots);
  cursor_ = cursor;
}

// -- Noise --------------------------------------------------------------------

ActionVector noise_sample(OuNoise& noise, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  const double scale = noise.sigma * std::sqrt(noise.dt);
  for (double& x : noise.x) x += noise.theta * (noise.mu - x) * noise.dt + scale * n(rng);
  return noise.x;
}

void noise_reset(OuNoise& noise) { noise.x.fill(noise.mu); }

// -- Agent --------------------------------------------------------------------

Agent make_agent(const std::vector<int>& hidden, double lr_actor, double lr_critic,
                 std::mt19937_64& rng) {
  Agent agent{Actor(hidden), Critic(hidden), Actor(hidden), Critic(hidden), {}, {}};
  init_network(agent.actor.params(), rng);
  init_network(agent.critic.params(), rng);
  agent.actor_target = agent.actor;
  agent.critic_target = agent.critic;
  agent.actor_opt = make_adam(agent.actor.params().size(), lr_actor);
  agent.critic_opt = make_adam(agent.critic.params().size(), lr_critic);
  return agent;
}

double critic_update(Agent& agent, std::span<const Transition> batch, double gamma) {
  if (batch.empty()) throw BufferTooSmall("critic update needs a non-empty batch");
  const BatchMatrices m = to_matrices(batch);
  const double n = static_cast<double>(batch.size());

  const Matrix next_actions = agent.actor_target.forward(m.s_next).actions;
  const Matrix next_q = agent.critic_target.forward(m.s_next, next_actions).q;
  const Matrix y = m.r + gamma * m.not_done.cwiseProduct(next_q);

  const CriticForward f = agent.critic.forward(m.s, m.a);
  const Matrix diff = f.q - y;
  const double loss = diff.squaredNorm() / n;
  if (!std::isfinite(loss)) throw Diverged("critic loss is not finite");

  NetParams grads(agent.critic.params().layers());
  agent.critic.backward(f, (2.0 / n) * diff, grads);
  adam_step(agent.critic.params().values(), grads.values(), agent.critic_opt);
  return loss;
}

double actor_update(Actor& actor, AdamState& opt, const Matrix& states, const QGradient& q) {
  if (states.cols() == 0) throw BufferTooSmall("actor update needs a non-empty batch");
  const double n = static_cast<double>(states.cols());
  const ActorForward f = actor.forward(states);
  const auto [values, dq_da] = q(states, f.actions);
  const double mean_q = values.sum() / n;
  if (!std::isfinite(mean_q) || !dq_da.allFinite()) throw Diverged("actor objective is not finite");

  NetParams grads(actor.params().layers());
  actor.backward(f, (-1.0 / n) * dq_da, grads);
  adam_step(actor.params().values(), grads.values(), opt);
  return mean_q;
}

double actor_update(Agent& agent, std::span<const Transition> batch) {
  const Critic& critic = agent.critic;
  const QGradient q = [&critic](const Matrix& states, const Matrix& actions) {
    const CriticForward f = critic.forward(states, actions);
    NetParams scratch(critic.params().layers());
    Matrix d_actions = critic.backward(f, Matrix::Ones(1, states.cols()), scratch);
    return std::make_pair(f.q, std::move(d_actions));
  };
  return actor_update(agent.actor, agent.actor_opt, to_matrices(batch).s, q);
}

void soft_update(NetParams& target, const NetParams& source, double tau) {
  if (!target.same_shape(source)) throw ShapeMismatch("soft update between different shapes");
  auto t = target.values();
  const auto s = source.values();
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = tau * s[i] + (1.0 - tau) * t[i];
}

// -- Milestones ---------------------------------------------------------------

double MilestoneRule::margin(double best) const {
  return std::max(relative_margin * std::abs(best), min_margin);
}

double rolling_mean(std::span<const double> history, int window) {
  if (history.empty() || window <= 0) return 0.0;
  const std::size_t n = std::min(history.size(), static_cast<std::size_t>(window));
  double sum = 0.0;
  for (std::size_t i = history.size() - n; i < history.size(); ++i) sum += history[i];
  return sum / static_cast<double>(n);
}

bool milestone_check(std::span<const double> history, const MilestoneRule& rule,
                     std::optional<double> best) {
  if (rule.window <= 0 || history.size() < static_cast<std::size_t>(rule.window)) return false;
  const double mean = rolling_mean(history, rule.window);
  if (!best) return true;
  return mean > *best + rule.margin(*best);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 finalizer over a stream-offset state
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace oculorl
