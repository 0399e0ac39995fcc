#include "oculorl/plant.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <fmt/format.h>

#include "oculorl/error.hpp"

namespace oculorl {

namespace {

struct RightGeometry {
  MuscleKind kind;
  Vec3 origin;     // skull frame, right eye
  Vec3 insertion;  // unnormalized eye-frame direction
  double l_opt;
  double l_slack;
};

// Right eye centered at z = 0.031. Rectus origins sit 3.5 globe radii from
// the center, 50 degrees behind their insertions, which keeps every path
// clear of the globe across +/-40 degrees of yaw and pitch. The obliques pull
// from an anterior superior/inferior nasal effective origin.
constexpr std::array<RightGeometry, kMusclesPerEye> kRightGeometry{{
    {MuscleKind::LR, {-0.0322, 0.0, 0.058}, {0.0, 0.0, 1.0}, 0.0293, 0.0107},
    {MuscleKind::MR, {-0.0322, 0.0, 0.004}, {0.0, 0.0, -1.0}, 0.0293, 0.0107},
    {MuscleKind::SR, {-0.0322, 0.027, 0.027}, {0.0, 1.0, -0.15}, 0.0294, 0.0107},
    {MuscleKind::IR, {-0.0322, -0.027, 0.027}, {0.0, -1.0, -0.15}, 0.0294, 0.0107},
    {MuscleKind::SO, {0.002, 0.034, 0.0184}, {-0.347, 0.818, 0.46}, 0.0254, 0.0093},
    {MuscleKind::IO, {0.002, -0.034, 0.0184}, {-0.347, -0.818, 0.46}, 0.0254, 0.0093},
}};

Vec3 mirror_z(const Vec3& v) { return {v.x, v.y, -v.z}; }

// Solves (a) x = b for symmetric positive definite 3x3 a.
Vec3 solve_spd3(const std::array<double, 9>& a, const Vec3& b) {
  const double c00 = a[4] * a[8] - a[5] * a[7];
  const double c01 = a[5] * a[6] - a[3] * a[8];
  const double c02 = a[3] * a[7] - a[4] * a[6];
  const double det = a[0] * c00 + a[1] * c01 + a[2] * c02;
  const double c10 = a[2] * a[7] - a[1] * a[8];
  const double c11 = a[0] * a[8] - a[2] * a[6];
  const double c12 = a[1] * a[6] - a[0] * a[7];
  const double c20 = a[1] * a[5] - a[2] * a[4];
  const double c21 = a[2] * a[3] - a[0] * a[5];
  const double c22 = a[0] * a[4] - a[1] * a[3];
  return Vec3{c00 * b.x + c10 * b.y + c20 * b.z, c01 * b.x + c11 * b.y + c21 * b.z,
              c02 * b.x + c12 * b.y + c22 * b.z} /
         det;
}

void step_eye(const PlantModel& model, Eye eye, EyeState& s, const Excitations& u, double h) {
  const PlantParams& p = model.params;
  const Vec3& center = model.center(eye);

  Vec3 torque = passive_torque(s.q, s.omega, p);
  // Damping Jacobian -d(torque)/d(omega), row-major.
  std::array<double, 9> damping{p.c_p, 0.0, 0.0, 0.0, p.c_p, 0.0, 0.0, 0.0, p.c_p};

  for (int k = 0; k < kMusclesPerEye; ++k) {
    const auto kind = static_cast<MuscleKind>(k);
    const int slot = muscle_index(eye, kind);
    const MuscleParams& mp = model.muscles[static_cast<std::size_t>(slot)];
    MuscleState& ms = s.muscles[static_cast<std::size_t>(k)];

    ms.activation = activation_step(ms.activation, u[static_cast<std::size_t>(slot)], h, mp);

    const MusclePath path = muscle_path(s.q, center, mp, p.globe_radius);
    const Vec3 moment = cross(path.insertion_world - center, path.line_of_action);
    ms.fiber_length = std::max(path.length - mp.l_slack, 1e-9);
    // d(length)/dt: insertion moves with omega x arm, the origin is fixed.
    ms.fiber_velocity = -dot(s.omega, moment);

    const double scale_v = mp.v_max * mp.l_opt;
    const double l_norm = ms.fiber_length / mp.l_opt;
    const double v_norm = ms.fiber_velocity / scale_v;
    ms.last_force = fiber_force(ms.activation, l_norm, v_norm, mp);
    torque += ms.last_force * moment;

    if (ms.last_force > 0.0 && ms.activation > 0.0) {
      const double dforce_dv = mp.f_max * ms.activation * active_force_length(l_norm) *
                               force_velocity_slope(v_norm) / scale_v;
      const double m[3] = {moment.x, moment.y, moment.z};
      for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) damping[static_cast<std::size_t>(3 * i + j)] += dforce_dv * m[i] * m[j];
      }
    }
  }

  // (I + h D) omega' = I omega + h torque(omega) + h D omega
  std::array<double, 9> lhs{};
  const double w[3] = {s.omega.x, s.omega.y, s.omega.z};
  double rhs[3] = {p.inertia * w[0] + h * torque.x, p.inertia * w[1] + h * torque.y,
                   p.inertia * w[2] + h * torque.z};
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      const auto ij = static_cast<std::size_t>(3 * i + j);
      lhs[ij] = h * damping[ij] + (i == j ? p.inertia : 0.0);
      rhs[i] += h * damping[ij] * w[j];
    }
  }
  s.omega = solve_spd3(lhs, {rhs[0], rhs[1], rhs[2]});
  s.q = integrate_orientation(s.q, s.omega, h);

  if (!is_finite(s.omega) || !std::isfinite(s.q.w) || !std::isfinite(s.q.x) ||
      !std::isfinite(s.q.y) || !std::isfinite(s.q.z)) {
    throw Diverged("non-finite eye state");
  }
  if (norm(s.omega) >= p.omega_limit) {
    throw Diverged(fmt::format("angular speed {:.1f} rad/s exceeds limit", norm(s.omega)));
  }
}

}  // namespace

void PlantParams::validate() const {
  auto require = [](bool ok, const char* key, const char* why) {
    if (!ok) throw ValidationError(key, why);
  };
  require(std::isfinite(inertia) && inertia > 0.0, "inertia", "must be > 0");
  require(std::isfinite(k_p) && k_p >= 0.0, "k_p", "must be >= 0");
  require(std::isfinite(c_p) && c_p >= 0.0, "c_p", "must be >= 0");
  require(substeps > 0, "substeps", "must be > 0");
  require(std::isfinite(globe_radius) && globe_radius > 0.0, "globe_radius", "must be > 0");
  require(is_finite(right_center) && is_finite(left_center), "eye_centers", "must be finite");
  require(right_center.z > left_center.z, "eye_centers", "right eye must lie at larger z");
  require(omega_limit > 0.0, "omega_limit", "must be > 0");
}

void PlantModel::validate() const {
  params.validate();
  for (const auto& m : muscles) m.validate();
}

PlantModel default_plant_model() {
  PlantModel model;
  for (const Eye eye : {Eye::Right, Eye::Left}) {
    for (const auto& g : kRightGeometry) {
      MuscleParams m;
      m.name = muscle_slot_name(eye, g.kind);
      const Vec3 dir = normalized(g.insertion);
      m.origin = eye == Eye::Right ? g.origin : mirror_z(g.origin);
      m.insertion_dir = eye == Eye::Right ? dir : mirror_z(dir);
      m.l_opt = g.l_opt;
      m.l_slack = g.l_slack;
      model.muscles[static_cast<std::size_t>(muscle_index(eye, g.kind))] = m;
    }
  }
  return model;
}

Vec3 passive_torque(const UnitQuat& q, const Vec3& omega, const PlantParams& p) {
  return -p.k_p * q.rotation_vector() - p.c_p * omega;
}

PlantState reset_plant(const PlantModel& model) {
  PlantState state;
  for (const Eye eye : {Eye::Right, Eye::Left}) {
    EyeState& e = state.eye(eye);
    for (int k = 0; k < kMusclesPerEye; ++k) {
      const MuscleParams& mp = model.muscle(eye, static_cast<MuscleKind>(k));
      const MusclePath path =
          muscle_path_unchecked(e.q, model.center(eye), mp, model.params.globe_radius);
      e.muscles[static_cast<std::size_t>(k)].fiber_length = path.length - mp.l_slack;
    }
  }
  return state;
}

PlantState plant_step(const PlantModel& model, const PlantState& state,
                      const Excitations& excitations, double dt_env) {
  Excitations u;
  std::transform(excitations.begin(), excitations.end(), u.begin(),
                 [](double x) { return std::clamp(x, 0.0, 1.0); });
  PlantState next = state;
  const int n = model.params.substeps;
  const double h = dt_env / n;
  for (int i = 0; i < n; ++i) {
    step_eye(model, Eye::Right, next.right, u, h);
    step_eye(model, Eye::Left, next.left, u, h);
  }
  return next;
}

Vec3 gaze_direction(const EyeState& eye) { return rotate_vector(eye.q, {1.0, 0.0, 0.0}); }

double mechanical_energy(const EyeState& eye, const PlantParams& p) {
  const double theta = eye.q.angle();
  return 0.5 * p.inertia * dot(eye.omega, eye.omega) + 0.5 * p.k_p * theta * theta;
}

AnatomicalAngles anatomical_angles(Eye eye, const UnitQuat& q) {
  constexpr double kDeg = 180.0 / std::numbers::pi;
  const FickAngles f = quat_to_fick_unchecked(q);
  // Right eye: nose toward -z, so abduction is gaze toward +z (negative yaw).
  const double side = eye == Eye::Right ? -1.0 : 1.0;
  return {side * f.yaw_rad * kDeg, f.pitch_rad * kDeg, side * f.torsion_rad * kDeg};
}

AnatomicalAngles single_muscle_response(const PlantModel& model, int slot, double duration,
                                        double dt_env) {
  if (slot < 0 || slot >= kMuscleCount) throw ValidationError("slot", "must lie in [0, 12)");
  Excitations u{};
  u[static_cast<std::size_t>(slot)] = 1.0;
  PlantState s = reset_plant(model);
  const int steps = static_cast<int>(std::lround(duration / dt_env));
  for (int i = 0; i < steps; ++i) s = plant_step(model, s, u, dt_env);
  const Eye eye = slot < kMusclesPerEye ? Eye::Right : Eye::Left;
  return anatomical_angles(eye, s.eye(eye).q);
}

}  // namespace oculorl
