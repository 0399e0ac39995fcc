#include "oculorl/env.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <fmt/format.h>

#include "oculorl/error.hpp"

namespace oculorl {

namespace {

void put(Observation& obs, int offset, const Vec3& v) {
  const auto o = static_cast<std::size_t>(offset);
  obs[o] = v.x;
  obs[o + 1] = v.y;
  obs[o + 2] = v.z;
}

void put(Observation& obs, int offset, const FickAngles& f) {
  const auto o = static_cast<std::size_t>(offset);
  obs[o] = f.yaw_rad;
  obs[o + 1] = f.pitch_rad;
  obs[o + 2] = f.torsion_rad;
}

Vec3 get(const Observation& obs, int offset) {
  const auto o = static_cast<std::size_t>(offset);
  return {obs[o], obs[o + 1], obs[o + 2]};
}

// Observation with the given POGs; orientation and activations from the plant.
Observation assemble(const PlantState& plant, const Vec3& target, const Vec3& pog_r,
                     const Vec3& pog_l) {
  Observation obs{};
  put(obs, obs_layout::kTarget, target);
  put(obs, obs_layout::kPogRight, pog_r);
  put(obs, obs_layout::kPogLeft, pog_l);
  put(obs, obs_layout::kFickRight, quat_to_fick_unchecked(plant.right.q));
  put(obs, obs_layout::kFickLeft, quat_to_fick_unchecked(plant.left.q));
  for (int k = 0; k < kMusclesPerEye; ++k) {
    const auto uk = static_cast<std::size_t>(k);
    obs[obs_layout::kActivations + uk] = plant.right.muscles[uk].activation;
    obs[obs_layout::kActivations + kMusclesPerEye + uk] = plant.left.muscles[uk].activation;
  }
  return obs;
}

UnitQuat random_small_rotation(std::mt19937_64& rng, double sigma) {
  std::normal_distribution<double> n(0.0, sigma);
  const double x = n(rng);
  const double y = n(rng);
  const double z = n(rng);
  return UnitQuat::from_rotation_vector({x, y, z});
}

}  // namespace

void EpisodeConfig::validate() const {
  auto require = [](bool ok, const char* key, const char* why) {
    if (!ok) throw ValidationError(key, why);
  };
  require(is_finite(target_base) && target_base.x > 0.0, "target_base", "x must be > 0");
  require(dy_range[0] <= dy_range[1], "dy_range", "must be ordered [lo, hi]");
  require(dz_range[0] <= dz_range[1], "dz_range", "must be ordered [lo, hi]");
  require(steps > 0, "steps", "must be > 0");
  require(std::isfinite(dt) && dt > 0.0, "dt", "must be > 0");
  for (double w : weights) require(std::isfinite(w) && w >= 0.0, "weights", "must be >= 0");
  require(std::isfinite(failure_reward) && failure_reward <= 0.0, "failure_reward",
          "must be <= 0");
  require(std::isfinite(initial_jitter) && initial_jitter >= 0.0, "initial_jitter",
          "must be >= 0");
}

Vec3 compute_pog(const EyeState& eye, const Vec3& eye_center, double target_x) {
  return ray_plane_x(eye_center, gaze_direction(eye), target_x);
}

int detect_crossed(const Vec3& pog_right, const Vec3& pog_left) {
  return pog_right.z < pog_left.z ? 1 : 0;
}

double compute_reward(const RewardTerms& t, const RewardWeights& w) {
  return -w[0] * t.dist_ro * t.dist_ro - w[1] * t.dist_lo * t.dist_lo - w[2] * t.dist_lr -
         w[3] * t.lr_y * t.lr_y - w[4] * t.lr_z;
}

RewardTerms measure_terms(const Vec3& pog_right, const Vec3& pog_left, const Vec3& target,
                          const RewardWeights& w) {
  RewardTerms t;
  t.dist_ro = norm(pog_right - target);
  t.dist_lo = norm(pog_left - target);
  t.dist_lr = norm(pog_right - pog_left);
  t.lr_y = pog_right.y - pog_left.y;
  t.lr_z = detect_crossed(pog_right, pog_left);
  t.r = compute_reward(t, w);
  return t;
}

Observation build_observation(const PlantState& plant, const PlantModel& model,
                              const Vec3& target) {
  const Vec3 pog_r = compute_pog(plant.right, model.params.right_center, target.x);
  const Vec3 pog_l = compute_pog(plant.left, model.params.left_center, target.x);
  return assemble(plant, target, pog_r, pog_l);
}

EyeEnv::EyeEnv(PlantModel model, EpisodeConfig config, std::uint64_t seed)
    : model_(std::move(model)), config_(config), rng_(seed) {
  model_.validate();
  config_.validate();
  plant_ = reset_plant(model_);
  target_ = config_.target_base;
}

Observation EyeEnv::reset(std::optional<Displacement> override_displacement) {
  plant_ = reset_plant(model_);
  if (config_.initial_jitter > 0.0) {
    for (const Eye eye : {Eye::Right, Eye::Left}) {
      EyeState& e = plant_.eye(eye);
      e.q = random_small_rotation(rng_, config_.initial_jitter);
      for (int k = 0; k < kMusclesPerEye; ++k) {
        const MuscleParams& mp = model_.muscle(eye, static_cast<MuscleKind>(k));
        const MusclePath path =
            muscle_path_unchecked(e.q, model_.center(eye), mp, model_.params.globe_radius);
        e.muscles[static_cast<std::size_t>(k)].fiber_length = path.length - mp.l_slack;
      }
    }
  }

  Displacement d;
  if (override_displacement) {
    d = *override_displacement;
  } else {
    std::uniform_real_distribution<double> dy(config_.dy_range[0], config_.dy_range[1]);
    std::uniform_real_distribution<double> dz(config_.dz_range[0], config_.dz_range[1]);
    d.dy = dy(rng_);
    d.dz = dz(rng_);
  }
  target_ = config_.target_base + Vec3{0.0, d.dy, d.dz};
  observation_ = build_observation(plant_, model_, target_);
  step_ = 0;
  done_ = false;
  return observation_;
}

StepResult EyeEnv::step(const ActionVector& action) {
  if (done_) throw EpisodeFinished("step() called on a finished episode; call reset()");

  Excitations u;
  std::transform(action.begin(), action.end(), u.begin(),
                 [](double a) { return std::isfinite(a) ? std::clamp(a, 0.0, 1.0) : 0.0; });

  StepResult result;
  ++step_;
  const Vec3 prev_pog_r = get(observation_, obs_layout::kPogRight);
  const Vec3 prev_pog_l = get(observation_, obs_layout::kPogLeft);
  try {
    plant_ = plant_step(model_, plant_, u, config_.dt);
  } catch (const Diverged&) {
    result.status = StepStatus::Diverged;
  } catch (const PenetratingPath&) {
    result.status = StepStatus::Diverged;
  }

  if (result.status == StepStatus::Running) {
    try {
      observation_ = build_observation(plant_, model_, target_);
    } catch (const GazeParallel&) {
      result.status = StepStatus::GazeParallel;
      observation_ = assemble(plant_, target_, prev_pog_r, prev_pog_l);
    }
  }

  result.terms = measure_terms(get(observation_, obs_layout::kPogRight),
                               get(observation_, obs_layout::kPogLeft), target_, config_.weights);
  if (result.status == StepStatus::Running) {
    result.reward = result.terms.r;
    if (step_ >= config_.steps) result.status = StepStatus::TimeLimit;
  } else {
    result.reward = config_.failure_reward;
    result.terms.r = config_.failure_reward;
  }
  done_ = result.status != StepStatus::Running;
  result.done = done_;
  result.observation = observation_;
  return result;
}

void write_trace_csv(const std::filesystem::path& path, const std::vector<TraceRow>& rows) {
  std::ofstream out(path);
  if (!out) throw IoFailure(fmt::format("cannot open {} for writing", path.string()));
  out << "step,target_x,target_y,target_z,pog_r_x,pog_r_y,pog_r_z,pog_l_x,pog_l_y,pog_l_z,"
         "fick_r_yaw,fick_r_pitch,fick_r_torsion,fick_l_yaw,fick_l_pitch,fick_l_torsion";
  for (int i = 0; i < kActionSize; ++i) out << ",act_" << i;
  out << ",dist_RO,dist_LO,dist_LR,lr_y,lr_z,reward\n";
  for (const TraceRow& row : rows) {
    std::string line = fmt::format("{}", row.step);
    for (double v : row.observation) line += fmt::format(",{:.17g}", v);
    line += fmt::format(",{:.17g},{:.17g},{:.17g},{:.17g},{},{:.17g}\n", row.terms.dist_ro,
                        row.terms.dist_lo, row.terms.dist_lr, row.terms.lr_y, row.terms.lr_z,
                        row.reward);
    out << line;
  }
  if (!out) throw IoFailure(fmt::format("write to {} failed", path.string()));
}

}  // namespace oculorl
