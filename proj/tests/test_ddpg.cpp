#include <cmath>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "oculorl/ddpg.hpp"
#include "oculorl/error.hpp"

using namespace oculorl;

namespace {

Transition numbered(double id) {
  Transition t;
  t.r = id;
  t.s[0] = id;
  return t;
}

Observation random_obs(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 0.5);
  Observation o;
  for (double& v : o) v = n(rng);
  return o;
}

// Milestone bookkeeping as the trainer runs it: evaluated at window boundaries.
std::vector<double> milestones_for(const std::vector<double>& rewards, const MilestoneRule& rule) {
  std::vector<double> history;
  std::vector<double> means;
  for (double r : rewards) {
    history.push_back(r);
    if (history.size() % static_cast<std::size_t>(rule.window) != 0) continue;
    std::optional<double> best;
    if (!means.empty()) best = means.back();
    if (milestone_check(history, rule, best)) means.push_back(rolling_mean(history, rule.window));
  }
  return means;
}

}  // namespace

TEST(ReplayBuffer, RingEvictsOldest) {
  ReplayBuffer b(2, 1);
  for (int i = 1; i <= 3; ++i) b.push(numbered(i));
  EXPECT_EQ(b.size(), 2u);
  const auto items = b.ordered();
  EXPECT_EQ(items[0].r, 2);
  EXPECT_EQ(items[1].r, 3);
}

TEST(ReplayBuffer, KeepsMostRecentCapacityExactly) {
  ReplayBuffer b(7, 1);
  for (int i = 0; i < 53; ++i) b.push(numbered(i));
  const auto items = b.ordered();
  ASSERT_EQ(items.size(), 7u);
  for (int i = 0; i < 7; ++i) EXPECT_EQ(items[static_cast<std::size_t>(i)].r, 46 + i);
}

TEST(ReplayBuffer, SeededSamplingRepeats) {
  ReplayBuffer a(100, 5);
  ReplayBuffer b(100, 5);
  for (int i = 0; i < 50; ++i) {
    a.push(numbered(i));
    b.push(numbered(i));
  }
  const auto sa = a.sample(16);
  const auto sb = b.sample(16);
  for (std::size_t i = 0; i < 16; ++i) EXPECT_EQ(sa[i].r, sb[i].r);
}

TEST(ReplayBuffer, UniformWithReplacement) {
  ReplayBuffer b(10, 123);
  for (int i = 0; i < 10; ++i) b.push(numbered(i));
  std::array<int, 10> counts{};
  const int n = 100000;
  for (int i = 0; i < n / 10; ++i) {
    for (const Transition& t : b.sample(10)) ++counts[static_cast<std::size_t>(t.r)];
  }
  const double p = 0.1;
  const double sigma = std::sqrt(n * p * (1 - p));
  for (int c : counts) EXPECT_LT(std::abs(c - n * p), 3 * sigma);
}

TEST(ReplayBuffer, TooSmall) {
  ReplayBuffer b(10, 1);
  b.push(numbered(0));
  EXPECT_THROW(b.sample(2), BufferTooSmall);
  EXPECT_NO_THROW(b.sample(1));
}

TEST(ReplayBuffer, RestoreReproducesSampling) {
  ReplayBuffer a(5, 9);
  for (int i = 0; i < 8; ++i) a.push(numbered(i));
  ReplayBuffer b(5, 0);
  b.restore(a.slots(), a.cursor());
  b.rng() = a.rng();
  a.push(numbered(100));
  b.push(numbered(100));
  std::vector<Transition> sa, sb;
  for (int i = 0; i < 4; ++i) {
    for (const Transition& t : a.sample(5)) sa.push_back(t);
    for (const Transition& t : b.sample(5)) sb.push_back(t);
  }
  for (std::size_t i = 0; i < sa.size(); ++i) EXPECT_EQ(sa[i].r, sb[i].r);
}

TEST(OuNoise, ZeroSigmaDecaysDeterministically) {
  OuNoise n;
  n.sigma = 0.0;
  n.x.fill(1.0);
  std::mt19937_64 rng(1);
  for (int i = 0; i < 10; ++i) noise_sample(n, rng);
  EXPECT_NEAR(n.x[0], std::pow(1.0 - n.theta * n.dt, 10), 1e-15);
  for (double v : n.x) EXPECT_EQ(v, n.x[0]);
}

TEST(OuNoise, PureRandomWalkVarianceGrowsLinearly) {
  std::mt19937_64 rng(2);
  const int runs = 2000;
  const int t = 25;
  double sum_sq = 0.0;
  for (int r = 0; r < runs; ++r) {
    OuNoise n;
    n.theta = 0.0;
    n.dt = 1.0;
    n.sigma = 0.3;
    for (int i = 0; i < t; ++i) noise_sample(n, rng);
    for (double v : n.x) sum_sq += v * v;
  }
  const double var = sum_sq / (runs * kActionSize);
  EXPECT_NEAR(var, 0.09 * t, 0.09 * t * 0.05);
}

TEST(OuNoise, StationaryVariance) {
  std::mt19937_64 rng(3);
  OuNoise n;
  n.dt = 0.05;
  for (int i = 0; i < 2000; ++i) noise_sample(n, rng);
  double sum_sq = 0.0;
  const int steps = 400000;
  for (int i = 0; i < steps; ++i) {
    noise_sample(n, rng);
    for (double v : n.x) sum_sq += v * v;
  }
  const double var = sum_sq / (static_cast<double>(steps) * kActionSize);
  EXPECT_NEAR(var, n.sigma * n.sigma / (2 * n.theta), 0.05 * n.sigma * n.sigma / (2 * n.theta));
}

TEST(OuNoise, ResetReturnsToMean) {
  OuNoise n;
  n.mu = 0.25;
  n.x.fill(3.0);
  noise_reset(n);
  for (double v : n.x) EXPECT_EQ(v, 0.25);
}

TEST(Agent, TargetsStartAsCopies) {
  std::mt19937_64 rng(1);
  const Agent a = make_agent({16, 16, 16}, 1e-3, 1e-3, rng);
  EXPECT_TRUE(std::equal(a.actor.params().values().begin(), a.actor.params().values().end(),
                         a.actor_target.params().values().begin()));
  EXPECT_TRUE(std::equal(a.critic.params().values().begin(), a.critic.params().values().end(),
                         a.critic_target.params().values().begin()));
}

TEST(CriticUpdate, TerminalTargetIsReward) {
  // One-unit critic with a hand-computable value; gamma 0 and done cut the bootstrap.
  std::mt19937_64 rng(1);
  Agent agent = make_agent({1, 1, 1}, 1e-3, 1e-3, rng);
  NetParams& p = agent.critic.params();
  p.set_zero();
  p.weight(0)(0, 0) = 2.0;
  p.weight(0)(0, kObservationSize) = -1.0;
  p.bias(0)(0) = 0.5;
  p.weight(1)(0, 0) = 3.0;
  p.bias(1)(0) = -1.0;
  p.weight(2)(0, 0) = 1.0;
  p.weight(3)(0, 0) = -2.0;
  p.bias(3)(0) = 0.25;
  Transition t;
  t.s[0] = 1.0;
  t.a[0] = 0.5;
  t.r = 1.0;
  t.done = true;
  const Actor actor_before = agent.actor;
  // Q = -9.75, y = 1
  EXPECT_DOUBLE_EQ(critic_update(agent, std::span(&t, 1), 0.0), 10.75 * 10.75);
  EXPECT_TRUE(std::equal(agent.actor.params().values().begin(),
                         agent.actor.params().values().end(),
                         actor_before.params().values().begin()));
  t.done = false;
  const double q = agent.critic.value(t.s, t.a);
  EXPECT_DOUBLE_EQ(critic_update(agent, std::span(&t, 1), 0.0), (q - 1.0) * (q - 1.0));
}

TEST(CriticUpdate, BootstrapsThroughTargets) {
  std::mt19937_64 rng(4);
  Agent agent = make_agent({8, 8, 8}, 1e-3, 1e-3, rng);
  Transition t;
  t.s = random_obs(rng);
  t.s_next = random_obs(rng);
  t.a.fill(0.4);
  t.r = -1.5;
  const double gamma = 0.9;
  const double y = t.r + gamma * agent.critic_target.value(t.s_next, agent.actor_target.act(t.s_next));
  const double q = agent.critic.value(t.s, t.a);
  EXPECT_NEAR(critic_update(agent, std::span(&t, 1), gamma), (q - y) * (q - y), 1e-12);
}

TEST(CriticUpdate, RegressesFixedTransition) {
  std::mt19937_64 rng(6);
  Agent agent = make_agent({32, 32, 32}, 1e-3, 1e-3, rng);
  Transition t;
  t.s = random_obs(rng);
  t.a.fill(0.5);
  t.r = -3.0;
  t.done = true;
  double loss = 0.0;
  for (int i = 0; i < 3000; ++i) loss = critic_update(agent, std::span(&t, 1), 0.96);
  EXPECT_LT(loss, 1e-6);
}

TEST(CriticUpdate, NonFiniteRewardDiverges) {
  std::mt19937_64 rng(1);
  Agent agent = make_agent({4, 4, 4}, 1e-3, 1e-3, rng);
  Transition t;
  t.r = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(critic_update(agent, std::span(&t, 1), 0.9), Diverged);
}

TEST(ActorUpdate, ConvergesOnQuadraticBowl) {
  std::mt19937_64 rng(7);
  Actor actor({32, 32, 32});
  init_network(actor.params(), rng);
  AdamState opt = make_adam(actor.params().size(), 1e-3);
  const ActionVector star = assemble_action_vector({0.3, 0.6, 0.4, 0.55, 0.35, 0.65}, 0.8, 1.2);
  Matrix a_star(kActionSize, 1);
  for (int i = 0; i < kActionSize; ++i) a_star(i, 0) = star[static_cast<std::size_t>(i)];
  const QGradient bowl = [&](const Matrix&, const Matrix& a) {
    const Matrix d = a - a_star.replicate(1, a.cols());
    return std::make_pair(Matrix(-d.colwise().squaredNorm()), Matrix(-2.0 * d));
  };
  Matrix s(kObservationSize, 1);
  const Observation o = random_obs(rng);
  for (int i = 0; i < kObservationSize; ++i) s(i, 0) = o[static_cast<std::size_t>(i)];
  for (int i = 0; i < 500; ++i) actor_update(actor, opt, s, bowl);
  const ActionVector a = actor.act(o);
  for (int i = 0; i < kActionSize; ++i) {
    EXPECT_NEAR(a[static_cast<std::size_t>(i)], star[static_cast<std::size_t>(i)], 1e-2) << i;
  }
}

TEST(ActorUpdate, ZeroCriticLeavesActor) {
  std::mt19937_64 rng(8);
  Agent agent = make_agent({8, 8, 8}, 1e-3, 1e-3, rng);
  agent.critic.params().set_zero();
  const Actor before = agent.actor;
  std::vector<Transition> batch(4);
  for (Transition& t : batch) t.s = random_obs(rng);
  const double q = actor_update(agent, batch);
  EXPECT_EQ(q, 0.0);
  const auto now = agent.actor.params().values();
  const auto old = before.params().values();
  for (std::size_t i = 0; i < now.size(); ++i) EXPECT_LT(std::abs(now[i] - old[i]), 1e-6);
}

TEST(ActorUpdate, ReturnsMeanCriticValue) {
  std::mt19937_64 rng(10);
  Agent agent = make_agent({8, 8, 8}, 1e-3, 1e-3, rng);
  std::vector<Transition> batch(3);
  double expected = 0.0;
  for (Transition& t : batch) {
    t.s = random_obs(rng);
    expected += agent.critic.value(t.s, agent.actor.act(t.s)) / 3.0;
  }
  EXPECT_NEAR(actor_update(agent, batch), expected, 1e-12);
}

TEST(SoftUpdate, Extremes) {
  NetParams target({{1, 1, LayerActivation::Linear}});
  NetParams source(target.layers());
  target.values()[0] = 0.0;
  source.values()[0] = 2.0;
  NetParams t = target;
  soft_update(t, source, 0.0);
  EXPECT_EQ(t.values()[0], 0.0);
  soft_update(t, source, 0.5);
  EXPECT_EQ(t.values()[0], 1.0);
  soft_update(t, source, 1.0);
  EXPECT_EQ(t.values()[0], 2.0);
}

TEST(SoftUpdate, ShapeMismatch) {
  NetParams a({{2, 1}});
  NetParams b({{3, 1}});
  EXPECT_THROW(soft_update(a, b, 0.1), ShapeMismatch);
}

TEST(SoftUpdate, GapShrinksWithFrozenSource) {
  std::mt19937_64 rng(3);
  NetParams src({{6, 6}, {6, 3}});
  NetParams tgt(src.layers());
  init_network(src, rng);
  init_network(tgt, rng);
  auto gap = [&] {
    double g = 0.0;
    for (std::size_t i = 0; i < src.size(); ++i) {
      g = std::max(g, std::abs(src.values()[i] - tgt.values()[i]));
    }
    return g;
  };
  double prev = gap();
  for (int i = 0; i < 50; ++i) {
    soft_update(tgt, src, 0.01);
    const double g = gap();
    EXPECT_LT(g, prev);
    prev = g;
  }
}

TEST(Milestones, RollingMean) {
  const std::vector<double> h{1, 2, 3, 4, 5};
  EXPECT_EQ(rolling_mean(h, 2), 4.5);
  EXPECT_EQ(rolling_mean(h, 10), 3.0);
  EXPECT_EQ(rolling_mean({}, 3), 0.0);
}

TEST(Milestones, MarginRule) {
  const MilestoneRule rule;
  EXPECT_EQ(rule.margin(-1000.0), 10.0);
  EXPECT_EQ(rule.margin(-10.0), 0.5);
}

TEST(Milestones, NeedsFullWindow) {
  MilestoneRule rule;
  rule.window = 10;
  EXPECT_FALSE(milestone_check(std::vector<double>(9, -1.0), rule, std::nullopt));
  EXPECT_TRUE(milestone_check(std::vector<double>(10, -1.0), rule, std::nullopt));
}

TEST(Milestones, ConstantHistoryGivesOne) {
  MilestoneRule rule;
  rule.window = 10;
  EXPECT_EQ(milestones_for(std::vector<double>(200, -50.0), rule).size(), 1u);
}

TEST(Milestones, SteadyImprovementGivesOnePerWindow) {
  MilestoneRule rule;
  rule.window = 10;
  std::vector<double> r;
  for (int w = 0; w < 12; ++w) {
    for (int i = 0; i < 10; ++i) r.push_back(-500.0 + 40.0 * w);
  }
  const auto means = milestones_for(r, rule);
  ASSERT_EQ(means.size(), 12u);
  for (std::size_t i = 1; i < means.size(); ++i) EXPECT_GT(means[i], means[i - 1]);
}

TEST(Milestones, NoisyFlatHistoryGivesOnlyTheFirst) {
  MilestoneRule rule;
  rule.window = 100;
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(-300.0, 2.0);
  std::vector<double> r(3000);
  for (double& v : r) v = n(rng);
  EXPECT_EQ(milestones_for(r, rule).size(), 1u);
}

TEST(DeriveSeed, MatchesSplitMixReference) {
  // First splitmix64 output for state 0.
  EXPECT_EQ(derive_seed(0, 0), 16294208416658607535ULL);
  EXPECT_EQ(derive_seed(7, 2), 16616101746815609346ULL);
  EXPECT_EQ(derive_seed(1, 5), 14072917602864530048ULL);
}

TEST(DeriveSeed, StreamsAreDistinct) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t s = 0; s < 20; ++s) {
    for (std::uint64_t k = 0; k < 200; ++k) seen.insert(derive_seed(s, k));
  }
  EXPECT_EQ(seen.size(), 4000u);
}
