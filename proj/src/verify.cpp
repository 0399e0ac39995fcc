#include "oculorl/verify.hpp"

#include <cmath>
#include <functional>
#include <numbers>
#include <random>

#include <fmt/format.h>

#include "oculorl/ddpg.hpp"
#include "oculorl/error.hpp"

namespace oculorl {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

CheckResult guarded(const std::string& name, const std::function<CheckResult()>& fn) {
  try {
    return fn();
  } catch (const std::exception& e) {
    return {name, false, fmt::format("threw: {}", e.what())};
  }
}

CheckResult check_dimensions(const RunConfig& c) {
  EyeEnv env(c.model, c.episode, c.seed);
  const Observation obs = env.reset();
  ActionVector a{};
  a.fill(2.0);  // out of range on purpose; must be clamped
  const StepResult r = env.step(a);
  bool ok = obs.size() == 27 && r.observation.size() == 27 && a.size() == 12 &&
            c.episode.dt == 0.01;
  for (int i = 0; i < kActionSize; ++i) {
    const double act = r.observation[static_cast<std::size_t>(obs_layout::kActivations + i)];
    ok = ok && act >= 0.0 && act <= 1.0;
  }
  return {"dimensions", ok, fmt::format("observation 27, action 12, dt {} s", c.episode.dt)};
}

CheckResult check_reward() {
  const RewardWeights w{16.0, 16.0, 32.0, 64.0, 64.0};
  struct Case {
    RewardTerms t;
    double expected;
  };
  const Case cases[] = {
      {{0.0, 0.0, 0.0, 0.0, 0, 0.0}, 0.0},
      {{0.1, 0.1, 0.0, 0.0, 0, 0.0}, -0.32},
      {{0.0, 0.0, 0.1, 0.05, 1, 0.0}, -67.36},
      {{0.031, 0.031, 0.062, 0.0, 0, 0.0}, -2.014752},
  };
  double worst = 0.0;
  for (const Case& k : cases) worst = std::max(worst, std::abs(compute_reward(k.t, w) - k.expected));
  return {"reward", worst < 1e-9, fmt::format("max abs error {:.3g}", worst)};
}

CheckResult check_activation(const RunConfig& c) {
  const MuscleParams& mp = c.model.muscles[0];
  std::mt19937_64 rng(c.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> step(1e-5, 0.1);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const double a = unit(rng);
    const double u = unit(rng);
    const double dt = step(rng);
    const double tau = u > a ? mp.tau_act : mp.tau_deact;
    const double exact = u + (a - u) * std::exp(-dt / tau);
    worst = std::max(worst, std::abs(activation_step(a, u, dt, mp) - exact));
  }
  return {"activation", worst < 1e-9, fmt::format("max abs error {:.3g} over 1000 cases", worst)};
}

CheckResult check_action_signs(const RunConfig& c) {
  int passed = 0;
  std::string failed;
  for (int slot = 0; slot < kMuscleCount; ++slot) {
    const AnatomicalAngles r = single_muscle_response(c.model, slot, 0.2, c.episode.dt);
    bool ok = false;
    switch (static_cast<MuscleKind>(slot % kMusclesPerEye)) {
      case MuscleKind::LR: ok = r.abduction_deg > 0.0; break;
      case MuscleKind::MR: ok = r.abduction_deg < 0.0; break;
      case MuscleKind::SR: ok = r.elevation_deg > 0.0; break;
      case MuscleKind::IR: ok = r.elevation_deg < 0.0; break;
      case MuscleKind::SO: ok = r.incyclotorsion_deg > 0.0 && r.elevation_deg < 0.0; break;
      case MuscleKind::IO: ok = r.incyclotorsion_deg < 0.0 && r.elevation_deg > 0.0; break;
    }
    if (ok) {
      ++passed;
    } else {
      failed += " " + c.model.muscles[static_cast<std::size_t>(slot)].name;
    }
  }
  return {"action_signs", passed == kMuscleCount,
          fmt::format("{}/12 muscles{}", passed, failed.empty() ? "" : ", failed:" + failed)};
}

CheckResult check_settling(const RunConfig& c) {
  PlantState s = reset_plant(c.model);
  for (EyeState* e : {&s.right, &s.left}) e->q = UnitQuat::from_axis_angle({0.0, 1.0, 0.0}, 20.0 * kDeg);
  const Excitations zero{};
  const int steps = static_cast<int>(std::lround(1.0 / c.episode.dt));
  double energy = mechanical_energy(s.right, c.model.params);
  bool monotone = true;
  for (int i = 0; i < steps; ++i) {
    s = plant_step(c.model, s, zero, c.episode.dt);
    const double e = mechanical_energy(s.right, c.model.params);
    monotone = monotone && e <= energy * (1.0 + 1e-12) + 1e-18;
    energy = e;
  }
  const double final_deg = std::max(s.right.q.angle(), s.left.q.angle()) / kDeg;
  return {"settling", final_deg < 1.0 && monotone,
          fmt::format("{:.4f} deg after 1 s, energy {}", final_deg,
                      monotone ? "non-increasing" : "increased")};
}

CheckResult check_gradients(const RunConfig& c) {
  std::mt19937_64 rng(derive_seed(c.seed, 77));
  Actor actor(c.train.hidden);
  Critic critic(c.train.hidden);
  init_network(actor.params(), rng);
  init_network(critic.params(), rng);
  std::normal_distribution<double> n(0.0, 0.5);
  Matrix states(kObservationSize, 4);
  Matrix actions(kActionSize, 4);
  for (Eigen::Index i = 0; i < states.size(); ++i) states.data()[i] = n(rng);
  for (Eigen::Index i = 0; i < actions.size(); ++i) actions.data()[i] = 0.5 + 0.2 * n(rng);

  // Scalar objective: sum of Q(s, actor(s)) with a fixed linear readout on the actions.
  Matrix readout(kActionSize, 4);
  for (Eigen::Index i = 0; i < readout.size(); ++i) readout.data()[i] = n(rng);
  const ActorForward af = actor.forward(states);
  NetParams actor_grad(actor.params().layers());
  actor.backward(af, readout, actor_grad);
  Actor probe_actor = actor;
  const double actor_err = gradient_check(
      [&](std::span<const double> p) {
        std::copy(p.begin(), p.end(), probe_actor.params().values().begin());
        return probe_actor.forward(states).actions.cwiseProduct(readout).sum();
      },
      actor.params().values(), actor_grad.values(), {1e-5, 300, c.seed});

  const CriticForward cf = critic.forward(states, actions);
  NetParams critic_grad(critic.params().layers());
  critic.backward(cf, Matrix::Ones(1, 4), critic_grad);
  Critic probe_critic = critic;
  const double critic_err = gradient_check(
      [&](std::span<const double> p) {
        std::copy(p.begin(), p.end(), probe_critic.params().values().begin());
        return probe_critic.forward(states, actions).q.sum();
      },
      critic.params().values(), critic_grad.values(), {1e-5, 300, c.seed});
  return {"gradients", actor_err < 1e-4 && critic_err < 1e-4,
          fmt::format("actor {:.2e}, critic {:.2e} max relative error", actor_err, critic_err)};
}

}  // namespace

std::vector<CheckResult> run_verification(const RunConfig& config) {
  std::vector<CheckResult> out;
  out.push_back(guarded("dimensions", [&] { return check_dimensions(config); }));
  out.push_back(guarded("reward", [] { return check_reward(); }));
  out.push_back(guarded("activation", [&] { return check_activation(config); }));
  out.push_back(guarded("action_signs", [&] { return check_action_signs(config); }));
  out.push_back(guarded("settling", [&] { return check_settling(config); }));
  out.push_back(guarded("gradients", [&] { return check_gradients(config); }));
  return out;
}

}  // namespace oculorl
