#pragma once

#include <array>

#include "oculorl/muscle.hpp"
#include "oculorl/vecmath.hpp"

namespace oculorl {

/// Two rigid globes in a fixed skull, each a 3-DoF rotational body driven by
/// six muscles plus a lumped orbital-tissue spring-damper.
struct PlantParams {
  double inertia = 4.32e-7;       ///< kg m^2, isotropic (solid sphere 7.5 g, r = 12 mm)
  double k_p = 0.015;             ///< N m / rad
  double c_p = 1.6099689437998485e-4;  ///< N m s / rad, 2 sqrt(k_p I)
  int substeps = 10;
  double globe_radius = 0.012;    ///< m
  Vec3 right_center{0.0, 0.0, 0.031};
  Vec3 left_center{0.0, 0.0, -0.031};
  double omega_limit = 2000.0;    ///< rad/s; beyond this the state is Diverged

  void validate() const;
};

/// Plant parameters plus the 12 muscles in right LR..IO, left LR..IO order.
struct PlantModel {
  PlantParams params;
  std::array<MuscleParams, kMuscleCount> muscles;

  const MuscleParams& muscle(Eye eye, MuscleKind kind) const {
    return muscles[static_cast<std::size_t>(muscle_index(eye, kind))];
  }
  const Vec3& center(Eye eye) const {
    return eye == Eye::Right ? params.right_center : params.left_center;
  }
  void validate() const;
};

/// Shipped geometry: pulley-like effective origins, straight paths, and
/// l_opt/l_slack placing fibers at 0.85 l_opt in primary position. The left
/// eye mirrors the right across the midsagittal plane.
PlantModel default_plant_model();

struct EyeState {
  UnitQuat q;       ///< eye frame -> skull frame
  Vec3 omega;       ///< world frame, rad/s
  std::array<MuscleState, kMusclesPerEye> muscles{};
};

struct PlantState {
  EyeState right;
  EyeState left;

  const EyeState& eye(Eye e) const { return e == Eye::Right ? right : left; }
  EyeState& eye(Eye e) { return e == Eye::Right ? right : left; }
};

/// -k_p * theta * axis(q) - c_p * omega.
Vec3 passive_torque(const UnitQuat& q, const Vec3& omega, const PlantParams& p);

/// Both eyes in primary position, at rest, zero activation.
PlantState reset_plant(const PlantModel& model);

/// Advances both eyes by dt_env with `substeps` internal steps. Velocity-
/// dependent torques (force-velocity and tissue damping) enter the velocity
/// update linearly-implicitly; orientation then follows the new velocity.
/// Throws Diverged on non-finite state or omega beyond the limit, and
/// PenetratingPath when a muscle path cuts through the globe.
PlantState plant_step(const PlantModel& model, const PlantState& state,
                      const Excitations& excitations, double dt_env);

/// Rotated +x axis.
Vec3 gaze_direction(const EyeState& eye);

/// 0.5 I |omega|^2 + 0.5 k_p theta^2 for one eye.
double mechanical_energy(const EyeState& eye, const PlantParams& p);

/// Fick angles re-signed per eye, in degrees: abduction turns the gaze away
/// from the nose, incyclotorsion rolls the top of the globe toward the nose.
struct AnatomicalAngles {
  double abduction_deg = 0.0;
  double elevation_deg = 0.0;
  double incyclotorsion_deg = 0.0;
};

AnatomicalAngles anatomical_angles(Eye eye, const UnitQuat& q);

/// Eye rotation after driving a single muscle slot (0..11) at full
/// excitation from primary rest for `duration` seconds of env steps.
AnatomicalAngles single_muscle_response(const PlantModel& model, int slot,
                                        double duration = 0.2, double dt_env = 0.01);

}  // namespace oculorl
