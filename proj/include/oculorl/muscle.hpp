#pragma once

#include <array>
#include <string>
#include <string_view>

#include "oculorl/vecmath.hpp"

namespace oculorl {

inline constexpr int kMusclesPerEye = 6;
inline constexpr int kMuscleCount = 12;

enum class Eye { Right = 0, Left = 1 };

/// Per-eye muscle slot. The numeric value is the index within an eye block.
enum class MuscleKind { LR = 0, MR = 1, SR = 2, IR = 3, SO = 4, IO = 5 };

std::string_view muscle_kind_name(MuscleKind kind);
/// "right_LR", "left_SO", ...
std::string muscle_slot_name(Eye eye, MuscleKind kind);
/// Index in the 12-slot order: right LR..IO, then left LR..IO.
constexpr int muscle_index(Eye eye, MuscleKind kind) {
  return static_cast<int>(eye) * kMusclesPerEye + static_cast<int>(kind);
}

using Excitations = std::array<double, kMuscleCount>;

/// Hill-type muscle with a rigid tendon and a straight-line path.
struct MuscleParams {
  std::string name;
  Vec3 origin;         ///< skull frame, m
  Vec3 insertion_dir;  ///< eye frame, unit; insertion = globe_radius * insertion_dir
  double f_max = 1.0;      ///< N
  double l_opt = 0.02;     ///< optimal fiber length, m
  double l_slack = 0.01;   ///< tendon slack length, m
  double v_max = 10.0;     ///< l_opt / s
  double tau_act = 0.010;  ///< s
  double tau_deact = 0.040;

  /// Throws ValidationError naming the offending field.
  void validate() const;
};

struct MuscleState {
  double activation = 0.0;
  double fiber_length = 0.0;
  double fiber_velocity = 0.0;
  double last_force = 0.0;
};

/// Exact solution of da/dt = (u - a)/tau over dt, with tau = tau_act when
/// u > a and tau_deact otherwise.
double activation_step(double a, double u, double dt, const MuscleParams& p);

// Normalized curves. Velocity is signed, shortening negative, in units of
// v_max * l_opt.
double active_force_length(double l_norm);
double force_velocity(double v_norm);
double force_velocity_slope(double v_norm);
double passive_force_length(double l_norm);

/// f_max * (a * fL * fV + fPE), never negative.
double fiber_force(double a, double l_norm, double v_norm, const MuscleParams& p);

struct MusclePath {
  double length = 0.0;
  Vec3 line_of_action;    ///< unit, from insertion toward origin
  Vec3 insertion_world;
  double clearance = 0.0;  ///< closest approach of the segment to the globe center, m
};

/// Straight segment from the rotated insertion to the origin, without the
/// penetration check.
MusclePath muscle_path_unchecked(const UnitQuat& eye_q, const Vec3& eye_center,
                                 const MuscleParams& p, double globe_radius);

/// Throws PenetratingPath when the segment passes within 0.9 * globe_radius
/// of the globe center.
MusclePath muscle_path(const UnitQuat& eye_q, const Vec3& eye_center, const MuscleParams& p,
                       double globe_radius);

/// Torque about the globe center for a tensile force along the path.
Vec3 muscle_torque(const UnitQuat& eye_q, const Vec3& eye_center, double force,
                   const MuscleParams& p, double globe_radius);

}  // namespace oculorl
